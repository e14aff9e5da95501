"""Bit-exact reader and canonical writer for the Gaussian cube text format.

Grammar (LF or CRLF accepted, LF emitted):

    line 1-2   free-text comments
    line 3     NATOMS OX OY OZ [NVAL]
    lines 4-6  Ni AXi AYi AZi          (axis voxel counts and step vectors)
    next lines |NATOMS| atom records:  Z CHARGE X Y Z
    if NATOMS < 0, one or more lines:  M id1 .. idM
    then       values, whitespace separated, axis-3 index fastest

Negative axis counts (the Angstrom convention) and negative NATOMS are
preserved verbatim as sign flags; no unit conversion happens anywhere.
Fortran "D" exponents are accepted on input and normalized to "E".
"""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .volume import Volume

_HEADER_CHUNK = 512
_VALUE_CHUNK = 1 << 20
_WS = b" \t\r\n\f\v"


class CubeError(Exception):
    """Base for cube format errors. ``line`` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MalformedHeader(CubeError):
    pass


class AtomCountMismatch(MalformedHeader):
    """File ends before |NATOMS| atom records were read.

    Subclasses MalformedHeader: a truncated atom block is also a header
    defect for callers that only scan the header.
    """


class ValueCountMismatch(CubeError):
    pass


class NonFiniteValue(CubeError):
    pass


class MalformedValue(CubeError):
    """Non-numeric token inside the value section."""


@dataclass(frozen=True)
class AtomRecord:
    atomic_number: int
    charge: float
    position: tuple[float, float, float]

    def __post_init__(self):
        if self.atomic_number < 0:
            raise ValueError(f"atomic number must be >= 0, got {self.atomic_number}")
        if not all(math.isfinite(x) for x in self.position):
            raise ValueError(f"atom position must be finite, got {self.position}")


@dataclass(frozen=True)
class AxisSpec:
    count: int  # voxels along the axis, after taking |count|
    vector: tuple[float, float, float]  # step per voxel, as stored
    sign_flag: int  # sign of the count field as read (+1 or -1)


@dataclass(frozen=True)
class CubeDocument:
    """Full parse of a cube file. Immutable; grid data lives in ``volume``."""

    comment1: str
    comment2: str
    natoms_raw: int
    atoms: tuple[AtomRecord, ...]
    volume: Volume
    axis_signs: tuple[int, int, int] = (1, 1, 1)
    dset_ids: tuple[int, ...] | None = None

    def __post_init__(self):
        if len(self.atoms) != abs(self.natoms_raw):
            raise ValueError(
                f"{len(self.atoms)} atom records but natoms field is {self.natoms_raw}"
            )
        if (self.dset_ids is not None) != (self.natoms_raw < 0):
            raise ValueError("dset_ids must be present exactly when natoms < 0")
        if self.dset_ids is not None and len(self.dset_ids) != self.volume.nval:
            raise ValueError(
                f"{len(self.dset_ids)} dataset ids but nval is {self.volume.nval}"
            )
        if any(s not in (-1, 1) for s in self.axis_signs):
            raise ValueError(f"axis signs must be +/-1, got {self.axis_signs}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.volume.dims

    @property
    def nval(self) -> int:
        return self.volume.nval

    @property
    def origin(self) -> np.ndarray:
        return self.volume.origin

    @property
    def axes(self) -> tuple[AxisSpec, AxisSpec, AxisSpec]:
        return tuple(
            AxisSpec(count=n, vector=tuple(vec), sign_flag=sign)
            for n, vec, sign in zip(
                self.volume.dims, self.volume.axes, self.axis_signs
            )
        )


@dataclass(frozen=True)
class WriteParams:
    sig_digits: int = 5  # 17 round-trips binary64 losslessly
    values_per_line: int = 6
    zero_threshold: float = 0.0  # |v| below this is written as exact 0

    def __post_init__(self):
        if not 1 <= self.sig_digits <= 17:
            raise ValueError(f"sig_digits must be in [1, 17], got {self.sig_digits}")
        if self.values_per_line < 1:
            raise ValueError("values_per_line must be >= 1")
        if self.zero_threshold < 0 or not math.isfinite(self.zero_threshold):
            raise ValueError("zero_threshold must be finite and >= 0")


@dataclass(frozen=True)
class CubeHeaderSummary:
    dims: tuple[int, int, int]
    origin: tuple[float, float, float]
    axes: tuple[AxisSpec, AxisSpec, AxisSpec]
    natoms: int
    natoms_raw: int
    nval: int
    value_count: int
    data_offset: int  # byte offset of the first value token's line


class _LineReader:
    """Buffered line reader over a raw binary stream.

    Reads in small chunks so header scanning touches only a bounded prefix;
    tracks 1-based line numbers and bytes consumed from the raw stream.
    """

    def __init__(self, raw, chunk_size: int = _HEADER_CHUNK):
        self._raw = raw
        self._chunk = chunk_size
        self._buf = bytearray()
        self._eof = False
        self.raw_consumed = 0
        self.line_no = 0  # lines fully returned so far

    def readline(self) -> bytes | None:
        while True:
            nl = self._buf.find(b"\n")
            if nl >= 0:
                line = bytes(self._buf[: nl + 1])
                del self._buf[: nl + 1]
                self.line_no += 1
                return line.rstrip(b"\r\n")
            if self._eof:
                if self._buf:
                    line = bytes(self._buf)
                    self._buf.clear()
                    self.line_no += 1
                    return line.rstrip(b"\r\n")
                return None
            data = self._raw.read(self._chunk)
            if not data:
                self._eof = True
            else:
                self.raw_consumed += len(data)
                self._buf.extend(data)

    @property
    def pending(self) -> bytes:
        return bytes(self._buf)

    @property
    def logical_consumed(self) -> int:
        """Bytes of the stream already delivered as lines."""
        return self.raw_consumed - len(self._buf)

    def take_rest(self) -> bytes:
        rest = bytes(self._buf)
        self._buf.clear()
        return rest


def _split_line(line: bytes) -> list[str]:
    return line.decode("ascii", errors="replace").split()


def _to_int(tok: str, line: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise MalformedHeader(f"{what}: expected integer, got {tok!r}", line) from None


def _to_float(tok: str, line: int, what: str) -> float:
    try:
        v = float(tok.replace("D", "E").replace("d", "e"))
    except ValueError:
        raise MalformedHeader(f"{what}: expected number, got {tok!r}", line) from None
    if not math.isfinite(v):
        raise NonFiniteValue(f"{what}: non-finite value {tok!r}", line)
    return v


@dataclass
class _Header:
    comment1: str
    comment2: str
    natoms_raw: int
    origin: tuple[float, float, float]
    counts: tuple[int, int, int]
    signs: tuple[int, int, int]
    vectors: tuple[tuple[float, float, float], ...]
    atoms: tuple[AtomRecord, ...]
    dset_ids: tuple[int, ...] | None
    nval: int


def _parse_header(reader: _LineReader) -> _Header:
    def need_line(what: str) -> bytes:
        line = reader.readline()
        if line is None:
            raise MalformedHeader(f"unexpected end of file in {what}", reader.line_no + 1)
        return line

    c1 = need_line("comments").decode("utf-8", errors="surrogateescape")
    c2 = need_line("comments").decode("utf-8", errors="surrogateescape")

    toks = _split_line(need_line("atom count / origin line"))
    ln = reader.line_no
    if len(toks) not in (4, 5):
        raise MalformedHeader(
            f"atom count / origin line: expected 4 or 5 tokens, got {len(toks)}", ln
        )
    natoms_raw = _to_int(toks[0], ln, "atom count")
    origin = tuple(_to_float(t, ln, "origin") for t in toks[1:4])
    nval_explicit: int | None = None
    if len(toks) == 5:
        nval_explicit = _to_int(toks[4], ln, "values per point")
        if nval_explicit < 1:
            raise MalformedHeader(f"values per point must be >= 1, got {nval_explicit}", ln)

    counts, signs, vectors = [], [], []
    for axis in range(3):
        toks = _split_line(need_line(f"axis {axis + 1} line"))
        ln = reader.line_no
        if len(toks) != 4:
            raise MalformedHeader(
                f"axis {axis + 1} line: expected 4 tokens, got {len(toks)}", ln
            )
        n = _to_int(toks[0], ln, f"axis {axis + 1} count")
        if n == 0:
            raise MalformedHeader(f"axis {axis + 1} count must be nonzero", ln)
        counts.append(abs(n))
        signs.append(1 if n > 0 else -1)
        vectors.append(tuple(_to_float(t, ln, f"axis {axis + 1} vector") for t in toks[1:4]))

    atoms = []
    for idx in range(abs(natoms_raw)):
        line = reader.readline()
        if line is None:
            raise AtomCountMismatch(
                f"file ends after {idx} of {abs(natoms_raw)} atom records",
                reader.line_no + 1,
            )
        toks = _split_line(line)
        ln = reader.line_no
        if len(toks) != 5:
            raise MalformedHeader(
                f"atom record {idx + 1}: expected 5 tokens, got {len(toks)}", ln
            )
        z = _to_int(toks[0], ln, "atomic number")
        if z < 0:
            raise MalformedHeader(f"atomic number must be >= 0, got {z}", ln)
        charge = _to_float(toks[1], ln, "atom charge")
        pos = tuple(_to_float(t, ln, "atom position") for t in toks[2:5])
        atoms.append(AtomRecord(atomic_number=z, charge=charge, position=pos))

    dset_ids = None
    nval = nval_explicit if nval_explicit is not None else 1
    if natoms_raw < 0:
        toks = _split_line(need_line("dataset id line"))
        ln = reader.line_no
        if not toks:
            raise MalformedHeader("dataset id line is empty", ln)
        m = _to_int(toks[0], ln, "dataset id count")
        if m < 1:
            raise MalformedHeader(f"dataset id count must be >= 1, got {m}", ln)
        if nval_explicit is not None and m != nval_explicit:
            raise MalformedHeader(
                f"dataset id count {m} contradicts values per point {nval_explicit}", ln
            )
        ids = [_to_int(t, ln, "dataset id") for t in toks[1:]]
        while len(ids) < m:  # ids may continue on following lines
            toks = _split_line(need_line("dataset id line"))
            ln = reader.line_no
            ids.extend(_to_int(t, ln, "dataset id") for t in toks)
        if len(ids) != m:
            raise MalformedHeader(
                f"expected {m} dataset ids, got {len(ids)}", ln
            )
        dset_ids = tuple(ids)
        nval = m

    return _Header(
        comment1=c1,
        comment2=c2,
        natoms_raw=natoms_raw,
        origin=origin,
        counts=tuple(counts),
        signs=tuple(signs),
        vectors=tuple(vectors),
        atoms=tuple(atoms),
        dset_ids=dset_ids,
        nval=nval,
    )


def _scan_segment_error(segment: bytes, first_line: int, skip: int, expected_left: int):
    """Slow re-scan of a value segment to attach a line number to an error.

    ``skip`` tokens at the start are known good; ``expected_left`` is how many
    values may still be stored.
    """
    line = first_line
    seen = 0
    for raw_line in segment.split(b"\n"):
        line += 1
        for tok in raw_line.split():
            seen += 1
            if seen <= skip:
                continue
            if seen > skip + expected_left:
                raise ValueCountMismatch("more data values than the header declares", line)
            text = tok.decode("ascii", errors="replace")
            try:
                v = float(text)
            except ValueError:
                raise MalformedValue(f"bad value token {text!r}", line) from None
            if not math.isfinite(v):
                raise NonFiniteValue(f"non-finite value token {text!r}", line)
    raise AssertionError("re-scan found no error in segment")  # pragma: no cover


def _read_values(reader: _LineReader, expected: int) -> np.ndarray:
    """Consume exactly ``expected`` whitespace-separated values, chunk-wise.

    Peak memory is the output array plus one chunk. Fast path converts whole
    chunks with numpy; the per-token scan runs only to locate an error line.
    """
    out = np.empty(expected, dtype=np.float64)
    filled = 0
    lines_done = reader.line_no  # full lines already consumed by the header
    carry = reader.take_rest()
    raw = reader._raw
    eof = False
    while True:
        data = raw.read(_VALUE_CHUNK) if not eof else b""
        if not data:
            eof = True
            segment, carry = carry, b""
        else:
            segment = carry + data
            # hold back a possibly split trailing token
            cut = len(segment)
            while cut > 0 and segment[cut - 1 : cut] not in (b" ", b"\t", b"\r", b"\n", b"\f", b"\v"):
                cut -= 1
            if cut == 0:
                carry = segment
                continue
            carry, segment = segment[cut:], segment[:cut]
        if b"D" in segment or b"d" in segment:
            segment = segment.replace(b"D", b"E").replace(b"d", b"e")
        tokens = segment.split()
        if tokens:
            if filled + len(tokens) > expected:
                _scan_segment_error(segment, lines_done, 0, expected - filled)
            try:
                arr = np.array(tokens, dtype=np.float64)
            except ValueError:
                _scan_segment_error(segment, lines_done, 0, expected - filled)
            if not np.all(np.isfinite(arr)):
                _scan_segment_error(segment, lines_done, 0, expected - filled)
            out[filled : filled + arr.size] = arr
            filled += arr.size
        lines_done += segment.count(b"\n")
        if eof:
            break
    if filled != expected:
        raise ValueCountMismatch(
            f"expected {expected} data values, found {filled}", lines_done + 1
        )
    return out


def _as_stream(data) -> io.BufferedIOBase:
    if isinstance(data, (bytes, bytearray, memoryview)):
        return io.BytesIO(bytes(data))
    return data


def parse_cube(source) -> CubeDocument:
    """Parse a cube file from bytes or a binary stream.

    Whitespace-insensitive within lines; accepts negative axis counts and
    NATOMS, CRLF endings, and Fortran D exponents. Every error carries a
    1-based line number.
    """
    reader = _LineReader(_as_stream(source), chunk_size=_VALUE_CHUNK)
    header = _parse_header(reader)
    n1, n2, n3 = header.counts
    values = _read_values(reader, n1 * n2 * n3 * header.nval)
    # negative zero normalizes to positive zero: the canonical writer emits
    # an unsigned zero token, so keeping -0.0 would break bit round-trips
    values[values == 0.0] = 0.0
    volume = Volume(
        dims=header.counts,
        origin=np.array(header.origin),
        axes=np.array(header.vectors),
        values=values,
        nval=header.nval,
    )
    return CubeDocument(
        comment1=header.comment1,
        comment2=header.comment2,
        natoms_raw=header.natoms_raw,
        atoms=header.atoms,
        volume=volume,
        axis_signs=header.signs,
        dset_ids=header.dset_ids,
    )


def read_cube(path) -> CubeDocument:
    with open(path, "rb") as fh:
        return parse_cube(fh)


def scan_header(source) -> CubeHeaderSummary:
    """Read dims/origin/axes/atom count/nval from the header only.

    Consumes a bounded prefix of the stream (the header plus at most one
    small buffer chunk); seekable streams are repositioned to the first
    value line afterwards.
    """
    stream = _as_stream(source)
    start = stream.tell() if stream.seekable() else 0
    reader = _LineReader(stream, chunk_size=_HEADER_CHUNK)
    header = _parse_header(reader)
    offset = start + reader.logical_consumed
    if stream.seekable():
        stream.seek(offset)
    n1, n2, n3 = header.counts
    axes = tuple(
        AxisSpec(count=c, vector=v, sign_flag=s)
        for c, v, s in zip(header.counts, header.vectors, header.signs)
    )
    return CubeHeaderSummary(
        dims=header.counts,
        origin=header.origin,
        axes=axes,
        natoms=len(header.atoms),
        natoms_raw=header.natoms_raw,
        nval=header.nval,
        value_count=n1 * n2 * n3 * header.nval,
        data_offset=offset,
    )


def _format_header(doc: CubeDocument, nval_token: bool) -> str:
    out = [doc.comment1, "\n", doc.comment2, "\n"]
    ox, oy, oz = doc.volume.origin
    out.append(f"{doc.natoms_raw:5d}{ox:12.6f}{oy:12.6f}{oz:12.6f}")
    if nval_token:
        out.append(f"{doc.nval:5d}")
    out.append("\n")
    for spec in doc.axes:
        vx, vy, vz = spec.vector
        out.append(f"{spec.sign_flag * spec.count:5d}{vx:12.6f}{vy:12.6f}{vz:12.6f}\n")
    for atom in doc.atoms:
        x, y, z = atom.position
        out.append(
            f"{atom.atomic_number:5d}{atom.charge:12.6f}{x:12.6f}{y:12.6f}{z:12.6f}\n"
        )
    if doc.dset_ids is not None:
        out.append("".join(f"{i:5d}" for i in (len(doc.dset_ids), *doc.dset_ids)))
        out.append("\n")
    return "".join(out)


def _value_lines(values: np.ndarray, params: WriteParams):
    """Yield formatted value lines in batches. Tokens are right-aligned in a
    fixed width of sig_digits + 8 so columns stay parseable for any sign and
    any exponent width; exact zero is written "0.0"."""
    d = params.sig_digits
    width = d + 8
    per = params.values_per_line
    thr = params.zero_threshold
    fmt_one = f"%#{width}.{d - 1}E"
    zero_tok = "0.0".rjust(width)
    n = values.size
    batch_lines = 4096
    fmt_full = fmt_one * per
    step = per * batch_lines
    for start in range(0, n, step):
        chunk = values[start : start + step]
        nz = (chunk == 0.0)
        if thr > 0.0:
            nz |= np.abs(chunk) < thr
        lines = []
        full = (chunk.size // per) * per
        if not nz.any():
            for ls in range(0, full, per):
                lines.append(fmt_full % tuple(chunk[ls : ls + per]))
            if full < chunk.size:
                tail = chunk[full:]
                lines.append((fmt_one * tail.size) % tuple(tail))
        else:
            for ls in range(0, chunk.size, per):
                vals = chunk[ls : ls + per]
                zs = nz[ls : ls + per]
                if zs.any():
                    lines.append(
                        "".join(
                            zero_tok if z else fmt_one % v for v, z in zip(vals, zs)
                        )
                    )
                else:
                    lines.append((fmt_one * vals.size) % tuple(vals))
        yield ("\n".join(lines) + "\n").encode("ascii")


def write_cube_chunks(doc: CubeDocument, params: WriteParams | None = None):
    """Yield the canonical serialization as byte chunks (streaming writer)."""
    params = params or WriteParams()
    # the NVAL token is emitted only when it carries information
    yield _format_header(doc, nval_token=doc.nval != 1).encode(
        "utf-8", errors="surrogateescape"
    )
    yield from _value_lines(doc.volume.values, params)


def write_cube(doc: CubeDocument, params: WriteParams | None = None, sink=None) -> bytes | None:
    """Serialize to canonical cube text. Returns bytes, or writes to ``sink``.

    With sig_digits=17 and zero_threshold=0 the output re-parses to
    bit-identical values (negative zero normalizes to positive zero).
    """
    if sink is None:
        return b"".join(write_cube_chunks(doc, params))
    for chunk in write_cube_chunks(doc, params):
        sink.write(chunk)
    return None


def canonical_digest(doc: CubeDocument, params: WriteParams | None = None) -> tuple[str, int]:
    """(sha256 hex, byte size) of the canonical serialization, streamed."""
    h = hashlib.sha256()
    size = 0
    for chunk in write_cube_chunks(doc, params):
        h.update(chunk)
        size += len(chunk)
    return h.hexdigest(), size
