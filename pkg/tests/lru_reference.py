"""Reference LRU implementation used as the eviction oracle.

Deliberately structured differently from the store under test: a single
explicit recency list (least recently used first) over whole blocks, with
a pinned set.  Capacity is counted in blocks, so drivers must use files
of exactly one full block each.
"""


class LruReference:
    def __init__(self, capacity_blocks):
        self.capacity = capacity_blocks
        self.order = []  # least recently used first
        self.pinned = set()
        self.evicted = []  # every victim ever, in order

    def resident(self, block_id):
        return block_id in self.order

    def touch(self, block_id):
        self.order.remove(block_id)
        self.order.append(block_id)

    def _evict_one(self):
        for i, candidate in enumerate(self.order):
            if candidate not in self.pinned:
                del self.order[i]
                self.evicted.append(candidate)
                return True
        return False

    def insert(self, block_id):
        """Evict until one block fits, then insert as most recent.

        Returns False without evicting anything when pins make the fit
        impossible even in principle (the degenerate-capacity rule).
        """
        if self.capacity - len(self.pinned) < 1:
            return False
        while len(self.order) + 1 > self.capacity:
            if not self._evict_one():
                return False
        self.order.append(block_id)
        return True

    def evict_blocks(self, target_blocks):
        goal = self.capacity - target_blocks
        while len(self.order) > goal:
            if not self._evict_one():
                break

    def pin(self, block_id, on=True):
        if on:
            self.pinned.add(block_id)
        else:
            self.pinned.discard(block_id)
