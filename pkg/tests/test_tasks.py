import json

import numpy as np
import pytest

from gtssm import group_core as gc
from gtssm.errors import CorruptRecord, FormatVersionMismatch
from gtssm.sampling import STREAM_VERSION, token_batch, token_stream
from gtssm.tasks import (
    FORMAT_VERSION,
    DatasetHeader,
    curriculum_plan,
    gen_dataset,
    make_record,
    read_dataset,
    write_dataset,
)

from conftest import TASK_SPECS, group


def reference_stream(seed, index, n, length):
    """Straight-line restatement of the stream contract."""
    bitgen = np.random.PCG64(np.random.SeedSequence([seed, index]))
    limit = (2**64 // n) * n
    out = []
    while len(out) < length:
        w = int(bitgen.random_raw())
        if w < limit:
            out.append(w % n)
    return out


class TestRecords:
    def test_c60(self, C60):
        assert make_record(C60, [51, 20, 4, 49]).y == (51, 11, 15, 4)

    def test_identity(self, S3):
        assert make_record(S3, [0] * 7).y == (0,) * 7

    def test_s3(self, S3):
        rec = make_record(S3, [S3.index_of("(12)"), S3.index_of("(123)")])
        assert [S3.label(v) for v in rec.y] == ["(12)", "(23)"]

    @pytest.mark.parametrize("spec", TASK_SPECS)
    def test_generated_records_are_prefix_products(self, spec):
        G = group(spec)
        header, recs = gen_dataset(G, 20, 30, seed=5)
        assert header.labels == G.element_labels and header.count == 20
        for rec in recs:
            assert list(rec.y) == gc.prefix_products(G, list(rec.x))
            assert len(rec.x) == 30


class TestStream:
    def test_contract(self):
        for n in (2, 6, 7, 60):
            assert token_stream(3, 11, n, 200).tolist() == reference_stream(3, 11, n, 200)

    def test_records_independent_of_sharding(self):
        whole = token_batch(9, 10, 25, 24)
        tail = token_batch(9, 4, 25, 24, start=6)
        assert np.array_equal(whole[6:], tail)

    def test_deterministic(self, S3):
        a = [r.x for r in gen_dataset(S3, 10, 10, 1)[1]]
        b = [r.x for r in gen_dataset(S3, 10, 10, 1)[1]]
        c = [r.x for r in gen_dataset(S3, 10, 10, 2)[1]]
        assert a == b and a != c

    @pytest.mark.parametrize("n", [2, 6, 24, 60])
    def test_uniform_marginals(self, n):
        toks = token_batch(0, 100, 1000, n).ravel()
        counts = np.bincount(toks, minlength=n)
        p = 1 / n
        sigma = np.sqrt(toks.size * p * (1 - p))
        assert np.all(np.abs(counts - toks.size * p) <= 5 * sigma)

    def test_version_in_header(self, S3):
        header, _ = gen_dataset(S3, 1, 1, 0)
        assert header.stream == STREAM_VERSION and header.format == FORMAT_VERSION


class TestFiles:
    def test_roundtrip_c24(self, tmp_path):
        G = group("cyclic:24")
        header, recs = gen_dataset(G, 1000, 12, seed=4)
        recs = list(recs)
        path = tmp_path / "c24.jsonl"
        assert write_dataset(path, header, recs) == 1000
        back_header, back = read_dataset(path)
        assert back_header == header and back == recs

    def test_layout(self, tmp_path, S3):
        header, recs = gen_dataset(S3, 2, 3, seed=0)
        path = tmp_path / "s3.jsonl"
        write_dataset(path, header, recs)
        raw = path.read_bytes()
        assert b"\r" not in raw and raw.endswith(b"\n")
        lines = raw.decode("utf-8").splitlines()
        assert len(lines) == 3
        assert json.loads(lines[0])["labels"] == list(S3.element_labels)
        assert set(json.loads(lines[1])) == {"x", "y"}

    def test_truncated(self, tmp_path, S3):
        header, recs = gen_dataset(S3, 5, 8, seed=0)
        path = tmp_path / "t.jsonl"
        write_dataset(path, header, recs)
        text = path.read_text()
        path.write_text(text[: len(text) - 9])
        with pytest.raises(CorruptRecord) as info:
            read_dataset(path)
        assert info.value.line == 6

    def test_missing_records(self, tmp_path, S3):
        header, recs = gen_dataset(S3, 5, 8, seed=0)
        path = tmp_path / "t.jsonl"
        write_dataset(path, header, recs)
        lines = path.read_text().splitlines(keepends=True)
        path.write_text("".join(lines[:4]))
        with pytest.raises(CorruptRecord):
            read_dataset(path)

    def test_tampered_target(self, tmp_path, S3):
        header, recs = gen_dataset(S3, 3, 4, seed=0)
        path = tmp_path / "t.jsonl"
        write_dataset(path, header, recs)
        lines = path.read_text().splitlines()
        doc = json.loads(lines[2])
        doc["y"][-1] = (doc["y"][-1] + 1) % 6
        lines[2] = json.dumps(doc)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorruptRecord) as info:
            read_dataset(path)
        assert info.value.line == 3

    def test_header_only(self, tmp_path, S3):
        header = DatasetHeader(S3.spec, S3.element_labels, 10, 0, 0)
        path = tmp_path / "empty.jsonl"
        assert write_dataset(path, header, []) == 0
        back, recs = read_dataset(path)
        assert back == header and recs == []

    def test_format_mismatch(self, tmp_path, S3):
        header = DatasetHeader(S3.spec, S3.element_labels, 10, 0, 0, format="gtssm-ds/0")
        path = tmp_path / "old.jsonl"
        write_dataset(path, header, [])
        with pytest.raises(FormatVersionMismatch):
            read_dataset(path)

    def test_rejects_bad_arguments(self, S3):
        with pytest.raises(ValueError):
            gen_dataset(S3, 0, 5, 0)


class TestCurriculum:
    def test_default(self):
        assert curriculum_plan(60, 2) == list(range(2, 61))

    def test_single(self):
        assert curriculum_plan(2, 2) == [2]

    def test_stride(self):
        assert curriculum_plan(10, 2, stride=2) == [2, 4, 6, 8, 10]

    def test_stride_ends_on_max(self):
        assert curriculum_plan(10, 2, stride=3) == [2, 5, 8, 10]

    def test_bad(self):
        with pytest.raises(ValueError):
            curriculum_plan(5, 6)
        with pytest.raises(ValueError):
            curriculum_plan(5, 1)
