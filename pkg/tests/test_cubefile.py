"""Reader/writer for the cube text format: grammar, errors, bit fidelity."""

import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_doc, raw_cube_text
from cubeforge import (
    AtomCountMismatch,
    CubeDocument,
    MalformedHeader,
    MalformedValue,
    NonFiniteValue,
    ValueCountMismatch,
    WriteParams,
    parse_cube,
    scan_header,
    write_cube,
)
from oracles import ref_parse_cube

MINIMAL = b"""comment one
comment two
    1    0.000000    0.000000    0.000000
    2    1.000000    0.000000    0.000000
    2    0.000000    1.000000    0.000000
    2    0.000000    0.000000    1.000000
    1    1.000000    0.000000    0.000000    0.000000
 0 1 2 3 4 5
 6 7
"""


class TestParseHeader:
    def test_minimal_cube(self):
        doc = parse_cube(MINIMAL)
        assert doc.dims == (2, 2, 2)
        assert doc.natoms_raw == 1
        assert doc.nval == 1
        assert doc.comment1 == "comment one"
        # axis-3 fastest: linear index i*4 + j*2 + k
        assert doc.volume.value_at(1, 0, 1) == 5.0

    def test_matches_reference_parser(self, rng):
        vals = rng.standard_normal(2 * 3 * 4)
        data = raw_cube_text(vals, dims=(2, 3, 4), natoms_raw=2)
        doc = parse_cube(data)
        ref = ref_parse_cube(data)
        assert doc.natoms_raw == ref["natoms_raw"]
        assert list(doc.origin) == ref["origin"]
        assert [a.count for a in doc.axes] == [abs(c) for c in ref["counts"]]
        assert np.array_equal(doc.volume.values, np.array(ref["values"]))

    def test_negative_counts_preserved_as_sign_flags(self, rng):
        vals = rng.standard_normal(8)
        doc = parse_cube(raw_cube_text(vals, negative_counts=True))
        assert doc.dims == (2, 2, 2)
        assert all(a.sign_flag == -1 for a in doc.axes)
        assert all(a.count == 2 for a in doc.axes)

    def test_negative_natoms_reads_dset_line(self, rng):
        vals = rng.standard_normal(8 * 2)
        data = raw_cube_text(vals, nval=2, natoms_raw=-1, dset_ids=(1, 2))
        doc = parse_cube(data)
        ref = ref_parse_cube(data)
        assert doc.nval == 2 == ref["nval"]
        assert doc.dset_ids == (1, 2)
        assert doc.natoms_raw == -1
        assert np.array_equal(doc.volume.values, np.array(ref["values"]))

    def test_dset_ids_may_span_lines(self):
        vals = list(range(8 * 3))
        data = raw_cube_text(vals, nval=3, natoms_raw=-1, nval_token=False)
        # split the dset line "3 1 2 3" across two lines
        data = data.replace(b"    3    1    2    3", b"    3    1\n    2    3")
        doc = parse_cube(data)
        assert doc.nval == 3
        assert doc.dset_ids == (1, 2, 3)

    def test_nval_adopted_from_dset_count_when_line3_omits_it(self):
        vals = list(range(8 * 2))
        data = raw_cube_text(vals, nval=2, natoms_raw=-1, nval_token=False)
        doc = parse_cube(data)
        assert doc.nval == 2

    def test_dset_count_contradicting_nval_rejected(self):
        vals = list(range(8 * 2))
        data = raw_cube_text(vals, nval=2, natoms_raw=-1, dset_ids=(1, 2, 3))
        with pytest.raises(MalformedHeader):
            parse_cube(data)

    def test_crlf_accepted(self, rng):
        vals = rng.standard_normal(8)
        unix = raw_cube_text(vals)
        dos = raw_cube_text(vals, line_ending="\r\n")
        a, b = parse_cube(unix), parse_cube(dos)
        assert np.array_equal(a.volume.values, b.volume.values)
        assert a.comment1 == b.comment1

    def test_d_exponents_normalized(self):
        data = raw_cube_text([1.5, -2.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0])
        data = data.replace(b"1.5000000000E+00", b"1.5000000000D+00")
        data = data.replace(b"5.0000000000E-01", b"5.0000000000d-01")
        doc = parse_cube(data)
        assert doc.volume.values[0] == 1.5
        assert doc.volume.values[2] == 0.5


class TestParseErrors:
    def error_line(self, exc_info):
        return exc_info.value.line

    def test_seven_of_eight_values(self):
        data = b"\n".join(MINIMAL.splitlines()[:-1]) + b"\n 6\n"
        with pytest.raises(ValueCountMismatch) as exc:
            parse_cube(data)
        assert self.error_line(exc) == 10  # one past the last data line

    def test_too_many_values(self):
        with pytest.raises(ValueCountMismatch) as exc:
            parse_cube(MINIMAL + b" 8 9\n")
        assert self.error_line(exc) == 10

    def test_bad_axis_line_token_count(self):
        broken = MINIMAL.replace(b"    2    0.000000    1.000000    0.000000", b"    2    0.000000")
        with pytest.raises(MalformedHeader) as exc:
            parse_cube(broken)
        assert self.error_line(exc) == 5

    def test_non_integer_atom_count(self):
        broken = MINIMAL.replace(
            b"    1    0.000000    0.000000    0.000000\n    2", b"  1.5    0.000000    0.000000    0.000000\n    2"
        )
        with pytest.raises(MalformedHeader) as exc:
            parse_cube(broken)
        assert self.error_line(exc) == 3

    def test_truncated_atom_block(self):
        cut = b"\n".join(MINIMAL.splitlines()[:6]) + b"\n"
        with pytest.raises(AtomCountMismatch) as exc:
            parse_cube(cut)
        assert self.error_line(exc) == 7
        assert isinstance(exc.value, MalformedHeader)  # header-level failure too

    def test_nan_token(self):
        with pytest.raises(NonFiniteValue) as exc:
            parse_cube(MINIMAL.replace(b" 6 7", b" nan 7"))
        assert self.error_line(exc) == 9

    def test_inf_token(self):
        with pytest.raises(NonFiniteValue):
            parse_cube(MINIMAL.replace(b" 6 7", b" 6 -inf"))

    def test_garbage_value_token(self):
        with pytest.raises(MalformedValue) as exc:
            parse_cube(MINIMAL.replace(b" 6 7", b" 6 oops"))
        assert self.error_line(exc) == 9

    def test_empty_stream(self):
        with pytest.raises(MalformedHeader) as exc:
            parse_cube(b"")
        assert self.error_line(exc) == 1

    def test_zero_axis_count(self):
        broken = MINIMAL.replace(b"    2    1.000000", b"    0    1.000000")
        with pytest.raises(MalformedHeader) as exc:
            parse_cube(broken)
        assert self.error_line(exc) == 4


class TestWriteCanonical:
    def test_three_digit_token(self):
        doc = parse_cube(raw_cube_text([0.0123456789] * 8))
        out = write_cube(doc, WriteParams(sig_digits=3))
        assert b"1.23E-02" in out

    def test_below_threshold_written_as_zero(self):
        doc = parse_cube(raw_cube_text([4.9e-13] * 8))
        out = write_cube(doc, WriteParams(zero_threshold=1e-12))
        assert b"0.0" in out
        assert b"4.9" not in out

    def test_exact_zero_token(self):
        doc = parse_cube(raw_cube_text([0.0] * 8))
        assert b"0.0\n" in write_cube(doc).replace(b" ", b"")

    def test_token_shape(self, rng):
        # optional minus, one digit, point, d-1 digits, E, sign, 2-digit exponent
        import re

        doc = make_doc(rng, dims=(3, 3, 3))
        body = write_cube(doc, WriteParams(sig_digits=5)).decode().splitlines()[8:]
        token_re = re.compile(r"^-?\d\.\d{4}E[+-]\d{2,3}$")
        for line in body:
            for tok in line.split():
                assert token_re.match(tok), tok

    def test_values_per_line(self, rng):
        doc = make_doc(rng, dims=(3, 3, 3))  # 27 values
        body = write_cube(doc, WriteParams(values_per_line=4)).decode().splitlines()[8:]
        assert [len(l.split()) for l in body] == [4, 4, 4, 4, 4, 4, 3]

    def test_lf_only(self, rng):
        assert b"\r" not in write_cube(make_doc(rng))

    def test_nval_token_only_when_meaningful(self, rng):
        plain = write_cube(make_doc(rng, nval=1))
        multi = write_cube(make_doc(rng, nval=2, negative_natoms=True))
        assert plain.splitlines()[2].split() == [b"2", *plain.splitlines()[2].split()[1:]]
        assert len(plain.splitlines()[2].split()) == 4
        assert len(multi.splitlines()[2].split()) == 5

    def test_header_field_widths(self, rng):
        line3 = write_cube(make_doc(rng)).splitlines()[2]
        assert line3 == b"    2" + line3[5:]
        assert len(line3) == 5 + 12 * 3


class TestRoundTrip:
    def test_canonical_output_is_fixed_point(self, rng):
        doc = make_doc(rng, dims=(3, 4, 2), natoms=3)
        first = write_cube(doc)
        second = write_cube(parse_cube(first))
        assert first == second

    def test_17_digits_round_trips_bitwise(self, rng):
        doc = make_doc(rng, dims=(4, 4, 4), scale=1e8)
        out = write_cube(doc, WriteParams(sig_digits=17))
        back = parse_cube(out)
        assert np.array_equal(back.volume.values, doc.volume.values)

    def test_17_digits_subnormals_and_extremes(self):
        special = [5e-324, 2.2250738585072014e-308, 1.7976931348623157e308, -4.9e-324, 1.0, -1.0, 0.0, 3.141592653589793]
        doc = parse_cube(raw_cube_text(special, value_format="{:.16E}"))
        out = write_cube(doc, WriteParams(sig_digits=17))
        back = parse_cube(out)
        assert np.array_equal(back.volume.values, doc.volume.values)

    def test_negative_zero_normalizes_to_positive(self):
        doc = parse_cube(raw_cube_text([-0.0] * 8, value_format="{:+.1E}"))
        assert all(struct.pack("<d", v) == struct.pack("<d", 0.0) for v in doc.volume.values)

    def test_comments_and_atoms_survive(self, rng):
        doc = make_doc(rng, natoms=4)
        back = parse_cube(write_cube(doc))
        assert back.comment1 == doc.comment1
        assert back.comment2 == doc.comment2
        assert back.atoms == tuple(
            type(a)(a.atomic_number, float(f"{a.charge:.6f}"), tuple(float(f"{x:.6f}") for x in a.position))
            for a in doc.atoms
        )

    @settings(max_examples=40, deadline=None)
    @given(
        st.lists(
            st.floats(allow_nan=False, allow_infinity=False, width=64),
            min_size=8,
            max_size=8,
        )
    )
    def test_lossless_mode_property(self, values):
        data = raw_cube_text(values, value_format="{:.17E}")
        doc = parse_cube(data)
        again = parse_cube(write_cube(doc, WriteParams(sig_digits=17)))
        assert np.array_equal(again.volume.values, doc.volume.values)


class TestScanHeader:
    def test_minimal_summary(self):
        s = scan_header(io.BytesIO(MINIMAL))
        assert s.dims == (2, 2, 2)
        assert s.natoms == 1
        assert s.nval == 1
        assert s.value_count == 8

    def test_stream_left_at_first_value_line(self):
        stream = io.BytesIO(MINIMAL)
        s = scan_header(stream)
        assert stream.tell() == s.data_offset
        assert stream.read(2) == b" 0"

    def test_truncated_atom_block_is_header_error(self):
        cut = b"\n".join(MINIMAL.splitlines()[:6]) + b"\n"
        with pytest.raises(MalformedHeader) as exc:
            scan_header(io.BytesIO(cut))
        assert exc.value.line == 7

    def test_reads_bounded_prefix_of_large_stream(self, rng):
        vals = rng.standard_normal(20 * 20 * 20)
        data = raw_cube_text(vals, dims=(20, 20, 20))

        class CountingStream(io.BytesIO):
            consumed = 0

            def read(self, n=-1):
                chunk = super().read(n)
                CountingStream.consumed += len(chunk)
                return chunk

        stream = CountingStream(data)
        CountingStream.consumed = 0
        s = scan_header(stream)
        assert s.dims == (20, 20, 20)
        assert CountingStream.consumed < 4096

    def test_negative_natoms_summary(self):
        data = raw_cube_text(list(range(16)), nval=2, natoms_raw=-1)
        s = scan_header(io.BytesIO(data))
        assert s.natoms_raw == -1
        assert s.natoms == 1
        assert s.nval == 2
        assert s.value_count == 16


class TestDocumentInvariants:
    def test_atom_count_must_match(self, rng):
        doc = make_doc(rng, natoms=2)
        with pytest.raises(ValueError):
            CubeDocument(
                comment1="x",
                comment2="y",
                natoms_raw=3,
                atoms=doc.atoms,
                volume=doc.volume,
            )

    def test_dset_requires_negative_natoms(self, rng):
        doc = make_doc(rng, natoms=1)
        with pytest.raises(ValueError):
            CubeDocument(
                comment1="x",
                comment2="y",
                natoms_raw=1,
                atoms=doc.atoms[:1],
                volume=doc.volume,
                dset_ids=(1,),
            )
