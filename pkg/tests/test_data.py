import numpy as np
import pytest

from antispoof import data


def high_freq_energy(img: np.ndarray, radius_frac: float = 1 / 6) -> float:
    """Spectral energy above a fixed radius, on the channel-mean image."""
    gray = img.mean(axis=0)
    size = gray.shape[0]
    spec = np.abs(np.fft.fftshift(np.fft.fft2(gray))) ** 2
    yy, xx = np.meshgrid(np.arange(size) - size // 2, np.arange(size) - size // 2, indexing="ij")
    mask = np.sqrt(yy**2 + xx**2) > radius_frac * size
    return float(spec[mask].sum())


class TestManifest:
    def test_three_row_fixture(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text(
            "path,label,dataset,split\n"
            "a.ppm,0,synthetic,train\n"
            "b.ppm,1,synthetic,train\n"
            "c.ppm,0,other,validation\n"
        )
        records = data.load_manifest(p)
        assert len(records) == 3
        assert records[0] == data.ManifestRecord("a.ppm", 0, "synthetic", "train")
        assert records[2].split == "validation"

    def test_empty_data_section(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("path,label,dataset,split\n")
        assert data.load_manifest(p) == []

    def test_bad_label_names_line(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text(
            "path,label,dataset,split\n"
            "a.ppm,0,d,train\n"
            "b.ppm,1,d,train\n"
            "c.ppm,0,d,train\n"
            "d.ppm,2,d,train\n"
        )
        with pytest.raises(data.DataError, match="line 5"):
            data.load_manifest(p)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("file,label,dataset,split\na,0,d,train\n")
        with pytest.raises(data.DataError, match="header"):
            data.load_manifest(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(data.DataError, match="not found"):
            data.load_manifest(tmp_path / "absent.csv")

    def test_round_trip_text_equality(self, tmp_path):
        src = tmp_path / "m.csv"
        src.write_text(
            "path,label,dataset,split\n"
            "x.ppm,1,celeba,train\n"
            "y.ppm,0,casia,validation\n"
        )
        out = tmp_path / "copy.csv"
        data.save_manifest(data.load_manifest(src), out)
        norm = lambda s: [line.strip() for line in s.strip().splitlines()]
        assert norm(out.read_text()) == norm(src.read_text())


class TestPixmaps:
    def test_all_white_p6(self, tmp_path):
        p = tmp_path / "w.ppm"
        p.write_bytes(b"P6\n2 2\n255\n" + b"\xff" * 12)
        img = data.load_image(p)
        assert img.shape == (3, 2, 2)
        assert np.array_equal(img, np.ones((3, 2, 2)))

    def test_p5_grayscale(self, tmp_path):
        p = tmp_path / "g.pgm"
        p.write_bytes(b"P5\n# comment\n2 1\n255\n\x00\xff")
        img = data.load_image(p)
        assert img.shape == (1, 1, 2)
        assert np.allclose(img[0, 0], [0.0, 1.0])

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "t.ppm"
        p.write_bytes(b"P6\n2 2\n255\n" + b"\xff" * 5)
        with pytest.raises(data.DataError, match="truncated"):
            data.load_image(p)

    def test_unsupported_magic(self, tmp_path):
        p = tmp_path / "x.ppm"
        p.write_bytes(b"P3\n1 1\n255\n0 0 0\n")
        with pytest.raises(data.DataError, match="magic"):
            data.load_image(p)

    def test_write_read_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        img = rng.uniform(size=(3, 5, 7))
        p = tmp_path / "r.ppm"
        data.save_image(img, p)
        back = data.load_image(p)
        assert back.shape == img.shape
        assert np.max(np.abs(back - img)) <= 1 / 255


class TestResize:
    def test_same_size_identity(self):
        rng = np.random.default_rng(4)
        img = rng.uniform(size=(3, 6, 9))
        assert np.max(np.abs(data.resize(img, 6, 9) - img)) < 1e-12

    def test_constant_stays_constant(self):
        img = np.full((1, 4, 4), 0.37)
        for h, w in [(2, 2), (7, 3), (1, 1), (8, 8)]:
            out = data.resize(img, h, w)
            assert out.shape == (1, h, w)
            assert np.allclose(out, 0.37, atol=1e-12)

    def test_checkerboard_halves_to_half(self):
        yy, xx = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
        checker = ((yy + xx) % 2).astype(np.float64)[None]
        out = data.resize(checker, 2, 2)
        # each output sample lands mid-way between four alternating pixels
        assert np.allclose(out, 0.5, atol=1e-12)

    def test_idempotent_at_same_target(self):
        rng = np.random.default_rng(5)
        img = rng.uniform(size=(3, 8, 8))
        once = data.resize(img, 5, 5)
        twice = data.resize(once, 5, 5)
        assert np.max(np.abs(once - twice)) < 1e-12


class TestSplitStats:
    def test_empty(self):
        stats = data.split_stats([])
        assert stats.total == 0
        assert stats.by_dataset_split == {}

    def test_authored_fixture(self):
        records = [
            data.ManifestRecord("a", 0, "d1", "train"),
            data.ManifestRecord("b", 0, "d1", "train"),
            data.ManifestRecord("c", 1, "d1", "validation"),
        ]
        stats = data.split_stats(records)
        assert stats.by_dataset_split[("d1", "train")] == 2
        assert stats.by_dataset_split[("d1", "validation")] == 1
        assert stats.by_split_label[("train", 0)] == 2
        assert stats.by_split_label[("validation", 1)] == 1

    def test_conservation(self):
        rng = np.random.default_rng(6)
        records = [
            data.ManifestRecord(
                f"f{i}",
                int(rng.integers(2)),
                rng.choice(["d1", "d2"]),
                rng.choice(["train", "validation"]),
            )
            for i in range(50)
        ]
        stats = data.split_stats(records)
        assert sum(stats.by_dataset_split.values()) == 50
        assert sum(stats.by_split_label.values()) == 50

    def test_render_mentions_label_headers(self):
        records = [data.ManifestRecord("a", 0, "d1", "train")]
        text = data.render_split_stats(data.split_stats(records))
        assert "Label 0 (Normal)" in text
        assert "Label 1 (Attack)" in text


class TestSynthetic:
    def test_counts_and_balance(self, tmp_path):
        manifest, records = data.generate_synthetic(4, 16, seed=1, out_dir=tmp_path / "c")
        assert len(records) == 8
        assert sum(r.label == 0 for r in records) == 4
        ppms = sorted((tmp_path / "c").glob("*.ppm"))
        assert len(ppms) == 8
        assert manifest.exists()

    def test_deterministic_corpus(self, tmp_path):
        data.generate_synthetic(3, 16, seed=9, out_dir=tmp_path / "a")
        data.generate_synthetic(3, 16, seed=9, out_dir=tmp_path / "b")
        for f in sorted((tmp_path / "a").iterdir()):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_val_fraction_split(self, tmp_path):
        _, records = data.generate_synthetic(4, 16, seed=2, out_dir=tmp_path / "c", val_fraction=0.5)
        per_split = {}
        for r in records:
            per_split[(r.split, r.label)] = per_split.get((r.split, r.label), 0) + 1
        assert per_split[("train", 0)] == 2
        assert per_split[("validation", 1)] == 2

    def test_spectral_separability_margin(self, tmp_path):
        manifest, records = data.generate_synthetic(16, 32, seed=11, out_dir=tmp_path / "c")
        energies = {0: [], 1: []}
        for r in records:
            img = data.load_image(data.image_path(r, manifest))
            energies[r.label].append(high_freq_energy(img))
        live = np.mean(energies[0])
        attack = np.mean(energies[1])
        assert attack > 2.0 * live, f"attack/live spectral ratio {attack / live:.2f} < 2"
