"""Configuration parsing and store assembly."""

import pytest

from tlstore.backing import DirectoryTarget, SimulatedTarget
from tlstore.config import (
    CliConfig,
    build_store,
    cluster_params,
    load_config,
    parse_bool,
    parse_config_text,
    parse_size,
)
from tlstore.errors import ConfigError
from tlstore.store import WriteMode


class TestParseSize:
    @pytest.mark.parametrize("text,expected", [
        ("0", 0),
        ("4096", 4096),
        ("4KiB", 4 * 1024),
        ("4kib", 4 * 1024),
        ("1MiB", 1024 ** 2),
        ("2 GiB", 2 * 1024 ** 3),
        ("1KB", 1000),
        ("1MB", 1000 ** 2),
        ("1GB", 1000 ** 3),
        ("1g", 1000 ** 3),
        ("1.5KiB", 1536),
        ("0.5MiB", 512 * 1024),
        ("64k", 64000),
    ])
    def test_accepts(self, text, expected):
        assert parse_size(text) == expected

    @pytest.mark.parametrize("text", [
        "", "x", "4XB", "KiB", "-5", "1..5KiB", "0.3KiB",
    ])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_size(text)


class TestParseBool:
    @pytest.mark.parametrize("text,expected", [
        ("1", True), ("true", True), ("Yes", True), ("on", True),
        ("0", False), ("false", False), ("No", False), ("off", False),
    ])
    def test_accepts(self, text, expected):
        assert parse_bool(text) is expected

    def test_rejects(self):
        with pytest.raises(ConfigError):
            parse_bool("maybe")


class TestParseConfigText:
    def test_comments_and_blanks_skipped(self):
        text = "# heading\n\nblock_size = 2MiB\n  # indented comment\n"
        assert parse_config_text(text) == {"block_size": 2 * 1024 ** 2}

    def test_unknown_key_is_named(self):
        with pytest.raises(ConfigError, match="blocksize"):
            parse_config_text("blocksize = 2MiB")

    def test_line_number_in_errors(self):
        with pytest.raises(ConfigError, match="line 3"):
            parse_config_text("# ok\nblock_size = 1MiB\nnot a pair\n")

    def test_bad_value_reports_line(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config_text("tier_capacity = huge")

    def test_server_dirs_split_on_commas(self):
        values = parse_config_text("server_dirs = /a/x, /b/y,/c/z")
        assert values["server_dirs"] == ("/a/x", "/b/y", "/c/z")

    def test_size_lists(self):
        values = parse_config_text("mountain_data_sizes = 4MiB, 8MiB")
        assert values["mountain_data_sizes"] == (4 * 1024 ** 2, 8 * 1024 ** 2)

    def test_modes_parse_to_enums(self):
        values = parse_config_text("default_write_mode = bypass")
        assert values["default_write_mode"] is WriteMode.BYPASS

    def test_bad_mode_rejected(self):
        with pytest.raises(ConfigError, match="write mode"):
            parse_config_text("default_write_mode = sideways")


class TestLoadConfig:
    def test_defaults_without_file(self):
        cfg = load_config()
        assert cfg.n_compute == 16
        assert cfg.m_data == 2
        assert cfg.mem_bw == 6267.0
        assert cfg.replication == 3
        assert cfg.block_size == 4 * 1024 ** 2

    def test_file_overrides_defaults(self, tmp_path):
        path = tmp_path / "a.cfg"
        path.write_text("n_compute = 32\nblock_size = 2MiB\n",
                        encoding="utf-8")
        cfg = load_config(path)
        assert cfg.n_compute == 32
        assert cfg.block_size == 2 * 1024 ** 2
        assert cfg.m_data == 2  # untouched default

    def test_overrides_beat_file(self, tmp_path):
        path = tmp_path / "a.cfg"
        path.write_text("n_compute = 32\n", encoding="utf-8")
        cfg = load_config(path, {"n_compute": 64})
        assert cfg.n_compute == 64

    def test_none_overrides_are_ignored(self):
        cfg = load_config(None, {"n_compute": None})
        assert cfg.n_compute == 16

    def test_unknown_override_rejected(self):
        with pytest.raises(ConfigError, match="nodes"):
            load_config(None, {"nodes": 4})

    def test_cluster_params_mapping(self):
        params = cluster_params(load_config())
        assert params.n_compute == 16
        assert params.nic_bw == 1170.0
        assert params.compute_disk_write == 116.0
        assert params.data_disk_read == 400.0


class TestBuildStore:
    def test_simulated_targets_by_default(self):
        cfg = CliConfig(servers=3)
        store = build_store(cfg)
        targets = store.backing.targets()
        assert len(targets) == 3
        assert all(isinstance(t, SimulatedTarget) for t in targets)

    def test_directory_targets_from_dirs(self, tmp_path):
        cfg = CliConfig(server_dirs=(str(tmp_path / "s0"),
                                     str(tmp_path / "s1")))
        store = build_store(cfg)
        targets = store.backing.targets()
        assert len(targets) == 2
        assert all(isinstance(t, DirectoryTarget) for t in targets)

    def test_store_config_carried_over(self):
        cfg = CliConfig(block_size=2 * 1024 ** 2,
                        tier_capacity=8 * 1024 ** 2,
                        default_write_mode=WriteMode.BYPASS)
        store = build_store(cfg)
        assert store.config.block_size == 2 * 1024 ** 2
        assert store.config.tier_capacity == 8 * 1024 ** 2
        assert store.config.default_write_mode is WriteMode.BYPASS

    def test_zero_rate_disables_tier_device(self):
        cfg = CliConfig(tier_read_mbps=0.0)
        store = build_store(cfg)
        assert store.tier_device is None

    def test_zero_servers_rejected(self):
        with pytest.raises(ConfigError):
            build_store(CliConfig(servers=0))

    def test_existing_manifest_is_loaded(self, tmp_path):
        dirs = (str(tmp_path / "s0"), str(tmp_path / "s1"))
        manifest = tmp_path / "m.tsv"
        cfg = CliConfig(server_dirs=dirs, manifest=str(manifest),
                        block_size=1024, tier_capacity=4096,
                        app_buffer=512, backing_buffer=1024)
        store = build_store(cfg)
        handle = store.create("keep", WriteMode.WRITE_THROUGH)
        handle.append(b"x" * 3000)
        handle.seal()
        reloaded = build_store(cfg)
        assert reloaded.files() == ["keep"]
        assert reloaded.read("keep") == b"x" * 3000
