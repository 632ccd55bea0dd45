"""Exception hierarchy shared by the store, backing layer, bench and CLI.

Every error carries a short machine-readable ``code`` and an ``exit_code``
used by the CLI (2 = usage, 3 = data/integrity, 4 = capacity).
"""


class StoreError(Exception):
    code = "error"
    exit_code = 3


class UsageError(StoreError):
    """Bad arguments, bad configuration, or an out-of-contract request."""

    code = "usage"
    exit_code = 2


class ConfigError(UsageError):
    code = "config"


class OutOfRangeError(UsageError):
    code = "out-of-range"


class DuplicatePathError(UsageError):
    code = "duplicate-path"


class UnknownPathError(StoreError):
    code = "unknown-path"


class UnknownBlockError(StoreError):
    code = "unknown-block"


class SealedFileError(StoreError):
    code = "sealed"


class NotSealedError(StoreError):
    code = "not-sealed"


class CapacityError(StoreError):
    code = "capacity"
    exit_code = 4


class TierMissError(StoreError):
    """A MemoryOnly read touched a block that is not resident in the tier."""

    code = "tier-miss"


class BackingMissError(StoreError):
    """A backing-only read touched a block that has no backing copy yet."""

    code = "backing-miss"


class DataLossError(StoreError):
    """A read touched a block whose only copy was evicted before checkpoint."""

    code = "data-loss"

    def __init__(self, block_id, detail=""):
        self.block_id = block_id
        suffix = f" ({detail})" if detail else ""
        super().__init__(f"block {block_id} lost: no surviving copy{suffix}")


class IntegrityError(StoreError):
    """Stored bytes do not match their recorded checksum."""

    code = "integrity"


class PartialPutError(StoreError):
    """A block put failed mid-way; lists the stripes that were written.

    The block is not registered, so readers can never observe the torn
    state; the caller may retry the put or clean up the listed stripes.
    """

    code = "partial-put"

    def __init__(self, block_id, written, cause):
        self.block_id = block_id
        self.written = list(written)
        self.cause = cause
        super().__init__(
            f"put of block {block_id} failed after {len(self.written)} "
            f"stripe(s): {cause}"
        )


class PinError(StoreError):
    code = "pin"
