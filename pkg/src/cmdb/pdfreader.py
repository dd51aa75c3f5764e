"""Minimal PDF text extraction.

Reads the class of PDFs this pipeline targets: text-layer documents with
classic cross-reference tables, FlateDecode or raw content streams, simple
(WinAnsi/MacRoman/Standard) or ToUnicode-mapped fonts. Deliberately out of
scope: encrypted files (rejected), object/xref streams (PDF 1.5 packed
objects), OCR of image-only scans (rejected so callers can fail fast),
and layout reconstruction.

The reader walks objects sequentially from the raw bytes, honoring stream
/Length entries, so binary stream content never confuses object discovery.
Text is recovered from content-stream show operators (Tj, TJ, ', ") with
per-font decoding; text-positioning operators start new lines.
"""

from __future__ import annotations

import base64
import re
import zlib
from dataclasses import dataclass, field


class PdfError(ValueError):
    """Base class for PDF parsing failures."""


class MalformedPdf(PdfError):
    """Structurally unusable PDF."""


class EncryptedPdf(PdfError):
    """Encrypted documents are not supported."""


class NoTextLayer(PdfError):
    """Pages carry images but no extractable text operators."""


_WHITESPACE = b"\x00\t\n\x0c\r "
_DELIMS = b"()<>[]{}/%"


@dataclass
class PdfName:
    value: str

    def __hash__(self):
        return hash(("PdfName", self.value))

    def __eq__(self, other):
        return isinstance(other, PdfName) and other.value == self.value


@dataclass
class PdfRef:
    num: int
    gen: int

    def __hash__(self):
        return hash(("PdfRef", self.num, self.gen))


@dataclass
class PdfStream:
    info: dict
    raw: bytes

    def data(self, warnings: list[str] | None = None) -> bytes:
        filt = self.info.get(PdfName("Filter"))
        if filt is None:
            return self.raw
        filters = filt if isinstance(filt, list) else [filt]
        data = self.raw
        for f in filters:
            name = f.value if isinstance(f, PdfName) else str(f)
            if name == "FlateDecode":
                try:
                    data = zlib.decompress(data)
                except zlib.error as exc:
                    raise MalformedPdf(f"bad Flate stream: {exc}") from exc
            elif name == "ASCIIHexDecode":
                hexed = re.sub(rb"[^0-9A-Fa-f]", b"", data.split(b">")[0])
                if len(hexed) % 2:
                    hexed += b"0"
                data = bytes.fromhex(hexed.decode("ascii"))
            elif name == "ASCII85Decode":
                body = data.strip()
                if body.startswith(b"<~"):
                    body = body[2:]
                if body.endswith(b"~>"):
                    body = body[:-2]
                try:
                    data = base64.a85decode(body, ignorechars=b" \t\n\r\x0b\x0c")
                except ValueError as exc:
                    raise MalformedPdf(f"bad ASCII85 stream: {exc}") from exc
            else:
                if warnings is not None:
                    warnings.append(f"unsupported stream filter {name}")
                return b""
        return data


class _Scanner:
    """Token-level scanner over PDF object syntax."""

    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def eof(self) -> bool:
        return self.pos >= len(self.data)

    def skip_ws(self) -> None:
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = self.data[self.pos]
            if c in _WHITESPACE:
                self.pos += 1
            elif c == 0x25:  # '%' comment
                nl = data.find(b"\n", self.pos)
                self.pos = n if nl < 0 else nl + 1
            else:
                break

    def peek_bytes(self, n: int) -> bytes:
        return self.data[self.pos: self.pos + n]

    def read_object(self):
        self.skip_ws()
        if self.eof():
            raise MalformedPdf("unexpected end of data")
        c = self.data[self.pos]
        if c == 0x2F:  # /
            return self.read_name()
        if c == 0x28:  # (
            return self.read_literal_string()
        if c == 0x3C:  # < or <<
            if self.peek_bytes(2) == b"<<":
                return self.read_dict()
            return self.read_hex_string()
        if c == 0x5B:  # [
            return self.read_array()
        if c in b"+-.0123456789":
            return self.read_number_or_ref()
        word = self.read_keyword()
        if word == b"true":
            return True
        if word == b"false":
            return False
        if word == b"null":
            return None
        raise MalformedPdf(f"unexpected token {word!r} at offset {self.pos}")

    def read_keyword(self) -> bytes:
        start = self.pos
        while not self.eof() and self.data[self.pos] not in _WHITESPACE \
                and self.data[self.pos] not in _DELIMS:
            self.pos += 1
        if self.pos == start:
            self.pos += 1
            return self.data[start: self.pos]
        return self.data[start: self.pos]

    def read_name(self) -> PdfName:
        self.pos += 1  # /
        start = self.pos
        while not self.eof() and self.data[self.pos] not in _WHITESPACE \
                and self.data[self.pos] not in _DELIMS:
            self.pos += 1
        raw = self.data[start: self.pos]
        text = re.sub(
            rb"#([0-9A-Fa-f]{2})",
            lambda m: bytes([int(m.group(1), 16)]),
            raw,
        )
        return PdfName(text.decode("latin-1"))

    def read_literal_string(self) -> bytes:
        self.pos += 1  # (
        out = bytearray()
        depth = 1
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = data[self.pos]
            if c == 0x5C:  # backslash
                self.pos += 1
                if self.pos >= n:
                    break
                e = data[self.pos]
                if e in b"nrtbf":
                    out += {0x6E: b"\n", 0x72: b"\r", 0x74: b"\t",
                            0x62: b"\b", 0x66: b"\f"}[e]
                    self.pos += 1
                elif e in b"()\\":
                    out.append(e)
                    self.pos += 1
                elif e in b"01234567":
                    oct_digits = bytearray()
                    while self.pos < n and len(oct_digits) < 3 and data[self.pos] in b"01234567":
                        oct_digits.append(data[self.pos])
                        self.pos += 1
                    out.append(int(oct_digits.decode(), 8) & 0xFF)
                elif e in b"\r\n":  # line continuation
                    self.pos += 1
                    if e == 0x0D and self.pos < n and data[self.pos] == 0x0A:
                        self.pos += 1
                else:
                    out.append(e)
                    self.pos += 1
            elif c == 0x28:
                depth += 1
                out.append(c)
                self.pos += 1
            elif c == 0x29:
                depth -= 1
                self.pos += 1
                if depth == 0:
                    return bytes(out)
                out.append(c)
            else:
                out.append(c)
                self.pos += 1
        raise MalformedPdf("unterminated literal string")

    def read_hex_string(self) -> bytes:
        self.pos += 1  # <
        end = self.data.find(b">", self.pos)
        if end < 0:
            raise MalformedPdf("unterminated hex string")
        hexed = re.sub(rb"[^0-9A-Fa-f]", b"", self.data[self.pos: end])
        self.pos = end + 1
        if len(hexed) % 2:
            hexed += b"0"
        return bytes.fromhex(hexed.decode("ascii"))

    def read_array(self) -> list:
        self.pos += 1  # [
        items = []
        while True:
            self.skip_ws()
            if self.eof():
                raise MalformedPdf("unterminated array")
            if self.data[self.pos] == 0x5D:
                self.pos += 1
                return items
            items.append(self.read_object())

    def read_dict(self) -> dict:
        self.pos += 2  # <<
        out = {}
        while True:
            self.skip_ws()
            if self.peek_bytes(2) == b">>":
                self.pos += 2
                return out
            if self.eof():
                raise MalformedPdf("unterminated dictionary")
            key = self.read_object()
            if not isinstance(key, PdfName):
                raise MalformedPdf(f"dictionary key must be a name, got {key!r}")
            out[key] = self.read_object()

    def read_number_or_ref(self):
        m = re.match(rb"[+-]?(?:\d+\.\d*|\.\d+|\d+)", self.data[self.pos:])
        if not m:
            raise MalformedPdf(f"bad number at offset {self.pos}")
        text = m.group()
        after = self.pos + len(text)
        # lookahead for "G R" making this an indirect reference
        if b"." not in text:
            ref = re.match(rb"\s+(\d+)\s+R\b", self.data[after: after + 32])
            if ref:
                self.pos = after + ref.end()
                return PdfRef(int(text), int(ref.group(1)))
        self.pos = after
        return float(text) if b"." in text else int(text)


@dataclass
class PdfDocument:
    objects: dict[tuple[int, int], object]
    trailer_dicts: list[dict]
    warnings: list[str] = field(default_factory=list)

    def resolve(self, obj, depth: int = 0):
        while isinstance(obj, PdfRef) and depth < 64:
            obj = self.objects.get((obj.num, obj.gen))
            depth += 1
        return obj

    def get(self, d: dict, key: str):
        return self.resolve(d.get(PdfName(key)))


def _parse_objects(data: bytes) -> PdfDocument:
    objects: dict[tuple[int, int], object] = {}
    trailers: list[dict] = []
    warnings: list[str] = []
    header_re = re.compile(rb"(\d+)\s+(\d+)\s+obj\b")
    pos = 0
    while True:
        m = header_re.search(data, pos)
        trailer_pos = data.find(b"trailer", pos)
        if trailer_pos != -1 and (m is None or trailer_pos < m.start()):
            sc = _Scanner(data, trailer_pos + len(b"trailer"))
            try:
                sc.skip_ws()
                trailers.append(sc.read_dict())
            except PdfError:
                warnings.append("unparseable trailer dictionary")
            pos = trailer_pos + len(b"trailer")
            continue
        if m is None:
            break
        sc = _Scanner(data, m.end())
        try:
            value = sc.read_object()
            sc.skip_ws()
            if sc.peek_bytes(6) == b"stream":
                sc.pos += 6
                if sc.peek_bytes(2) == b"\r\n":
                    sc.pos += 2
                elif sc.peek_bytes(1) in (b"\n", b"\r"):
                    sc.pos += 1
                length = value.get(PdfName("Length")) if isinstance(value, dict) else None
                if isinstance(length, PdfRef):
                    # length stored elsewhere; fall back to scanning
                    end = data.find(b"endstream", sc.pos)
                    if end < 0:
                        raise MalformedPdf("unterminated stream")
                    raw = data[sc.pos: end].rstrip(b"\r\n")
                    sc.pos = end
                else:
                    n = int(length or 0)
                    raw = data[sc.pos: sc.pos + n]
                    sc.pos += n
                    end = data.find(b"endstream", sc.pos)
                    if end < 0:
                        raise MalformedPdf("unterminated stream")
                    sc.pos = end
                sc.pos += len(b"endstream")
                value = PdfStream(info=value, raw=raw)
            objects[(int(m.group(1)), int(m.group(2)))] = value
            pos = sc.pos
        except PdfError as exc:
            warnings.append(f"skipping unparseable object {m.group(1).decode()}: {exc}")
            pos = m.end()
    return PdfDocument(objects=objects, trailer_dicts=trailers, warnings=warnings)


# --------------------------------------------------------------------------
# Fonts
# --------------------------------------------------------------------------

_BFCHAR_RE = re.compile(rb"<([0-9A-Fa-f]+)>\s*<([0-9A-Fa-f]*)>")
_BFRANGE_RE = re.compile(
    rb"<([0-9A-Fa-f]+)>\s*<([0-9A-Fa-f]+)>\s*(<[0-9A-Fa-f]*>|\[[^\]]*\])"
)


def _utf16be(hexstr: bytes) -> str:
    if not hexstr:
        return ""
    raw = bytes.fromhex(hexstr.decode("ascii"))
    if len(raw) % 2:
        raw += b"\x00"
    return raw.decode("utf-16-be", errors="ignore")


@dataclass
class FontDecoder:
    code_width: int = 1
    cmap: dict[int, str] | None = None
    encoding: str = "cp1252"

    def decode(self, raw: bytes) -> str:
        if self.cmap is not None:
            w = self.code_width
            chars = []
            for i in range(0, len(raw) - w + 1, w):
                code = int.from_bytes(raw[i: i + w], "big")
                chars.append(self.cmap.get(code, ""))
            return "".join(chars)
        try:
            return raw.decode(self.encoding)
        except (UnicodeDecodeError, LookupError):
            return raw.decode("latin-1", errors="replace")


def _parse_tounicode(data: bytes) -> FontDecoder:
    width = 1
    m = re.search(rb"begincodespacerange\s*<([0-9A-Fa-f]+)>", data)
    if m:
        width = max(1, len(m.group(1)) // 2)
    cmap: dict[int, str] = {}
    for section in re.finditer(rb"beginbfchar(.*?)endbfchar", data, re.S):
        for src, dst in _BFCHAR_RE.findall(section.group(1)):
            cmap[int(src, 16)] = _utf16be(dst)
    for section in re.finditer(rb"beginbfrange(.*?)endbfrange", data, re.S):
        for lo, hi, dst in _BFRANGE_RE.findall(section.group(1)):
            lo_i, hi_i = int(lo, 16), int(hi, 16)
            if dst.startswith(b"["):
                targets = re.findall(rb"<([0-9A-Fa-f]*)>", dst)
                for off, t in enumerate(targets):
                    if lo_i + off <= hi_i:
                        cmap[lo_i + off] = _utf16be(t)
            else:
                base_hex = dst.strip(b"<>")
                base_text = _utf16be(base_hex)
                if base_text:
                    base_cp = ord(base_text[-1])
                    prefix = base_text[:-1]
                    for off in range(hi_i - lo_i + 1):
                        cmap[lo_i + off] = prefix + chr(base_cp + off)
    return FontDecoder(code_width=width, cmap=cmap)


_SIMPLE_ENCODINGS = {
    "WinAnsiEncoding": "cp1252",
    "MacRomanEncoding": "mac_roman",
    "StandardEncoding": "latin-1",
    "PDFDocEncoding": "latin-1",
}


def _font_decoder(doc: PdfDocument, font_obj) -> FontDecoder:
    font = doc.resolve(font_obj)
    if not isinstance(font, dict):
        return FontDecoder()
    tounicode = doc.get(font, "ToUnicode")
    if isinstance(tounicode, PdfStream):
        return _parse_tounicode(tounicode.data(doc.warnings))
    subtype = doc.get(font, "Subtype")
    if isinstance(subtype, PdfName) and subtype.value == "Type0":
        doc.warnings.append("composite font without ToUnicode; text skipped")
        return FontDecoder(code_width=2, cmap={})
    enc = doc.get(font, "Encoding")
    if isinstance(enc, PdfName):
        return FontDecoder(encoding=_SIMPLE_ENCODINGS.get(enc.value, "latin-1"))
    if isinstance(enc, dict):
        base = doc.get(enc, "BaseEncoding")
        name = base.value if isinstance(base, PdfName) else "StandardEncoding"
        if PdfName("Differences") in enc:
            doc.warnings.append("font /Differences ignored; using base encoding")
        return FontDecoder(encoding=_SIMPLE_ENCODINGS.get(name, "latin-1"))
    return FontDecoder()


# --------------------------------------------------------------------------
# Content streams
# --------------------------------------------------------------------------

_TEXT_SHOW_OPS = {b"Tj", b"'", b'"', b"TJ"}
_LINE_BREAK_OPS = {b"Td", b"TD", b"T*", b"Tm"}


def _page_text(doc: PdfDocument, content: bytes, fonts: dict[str, FontDecoder]) -> tuple[str, bool]:
    """Extract text from one page's content stream.

    Returns (text, saw_image). Each positioning operator starts a new
    line; kerning inside TJ arrays is ignored.
    """
    sc = _Scanner(content)
    stack: list = []
    lines: list[str] = [""]
    current = FontDecoder()
    saw_image = False

    def show(raw: bytes) -> None:
        lines[-1] += current.decode(raw)

    def newline() -> None:
        if lines[-1]:
            lines.append("")

    while True:
        sc.skip_ws()
        if sc.eof():
            break
        c = sc.data[sc.pos]
        if c in b"/(<[+-.0123456789":
            try:
                stack.append(sc.read_object())
            except PdfError:
                sc.pos += 1
            continue
        op = sc.read_keyword()
        if op == b"BI":  # inline image: skip to EI
            end = sc.data.find(b"EI", sc.pos)
            sc.pos = len(sc.data) if end < 0 else end + 2
            saw_image = True
        elif op == b"Do":
            saw_image = True
        elif op == b"Tf" and len(stack) >= 2:
            name = stack[-2]
            if isinstance(name, PdfName):
                current = fonts.get(name.value, FontDecoder())
        elif op == b"Tj" and stack and isinstance(stack[-1], bytes):
            show(stack[-1])
        elif op == b"'" and stack and isinstance(stack[-1], bytes):
            newline()
            show(stack[-1])
        elif op == b'"' and stack and isinstance(stack[-1], bytes):
            newline()
            show(stack[-1])
        elif op == b"TJ" and stack and isinstance(stack[-1], list):
            for item in stack[-1]:
                if isinstance(item, bytes):
                    show(item)
        elif op in _LINE_BREAK_OPS or op == b"ET":
            newline()
        if op not in (b"BI",):
            stack.clear()
    return "\n".join(line for line in lines if line), saw_image


# --------------------------------------------------------------------------
# Public API
# --------------------------------------------------------------------------

@dataclass
class ExtractedPage:
    text: str
    has_images: bool


@dataclass
class ExtractedDocument:
    pages: list[ExtractedPage]
    warnings: list[str]


def _collect_pages(doc: PdfDocument, node, inherited_resources=None,
                   seen: set | None = None) -> list[dict]:
    seen = seen if seen is not None else set()
    node_resolved = doc.resolve(node)
    if not isinstance(node_resolved, dict):
        return []
    key = id(node_resolved)
    if key in seen or len(seen) > 10000:
        return []
    seen.add(key)
    resources = doc.get(node_resolved, "Resources") or inherited_resources
    node_type = doc.get(node_resolved, "Type")
    if isinstance(node_type, PdfName) and node_type.value == "Page":
        page = dict(node_resolved)
        if resources is not None:
            page[PdfName("Resources")] = resources
        return [page]
    kids = doc.get(node_resolved, "Kids") or []
    pages = []
    for kid in kids:
        pages.extend(_collect_pages(doc, kid, resources, seen))
    return pages


def extract_text(data: bytes) -> ExtractedDocument:
    """Extract per-page text from PDF bytes.

    Raises :class:`MalformedPdf`, :class:`EncryptedPdf` or
    :class:`NoTextLayer` (image-bearing pages with zero text).
    """
    if b"%PDF-" not in data[:1024]:
        raise MalformedPdf("missing %PDF header")
    doc = _parse_objects(data)
    for trailer in doc.trailer_dicts:
        if PdfName("Encrypt") in trailer:
            raise EncryptedPdf("document has an /Encrypt dictionary")
    if not doc.objects:
        raise MalformedPdf("no parseable objects")

    root = None
    for trailer in doc.trailer_dicts:
        root = doc.get(trailer, "Root") or root
    if root is None:
        for value in doc.objects.values():
            v = doc.resolve(value)
            if isinstance(v, dict):
                t = doc.get(v, "Type")
                if isinstance(t, PdfName) and t.value == "Catalog":
                    root = v
                    break
    if not isinstance(root, dict):
        raise MalformedPdf("no document catalog (object streams are unsupported)")

    page_nodes = _collect_pages(doc, doc.get(root, "Pages"))
    if not page_nodes:
        raise MalformedPdf("catalog has no page tree")

    pages: list[ExtractedPage] = []
    for node in page_nodes:
        resources = doc.get(node, "Resources") or {}
        font_dict = doc.get(resources, "Font") if isinstance(resources, dict) else None
        fonts = {}
        if isinstance(font_dict, dict):
            fonts = {name.value: _font_decoder(doc, ref)
                     for name, ref in font_dict.items()}
        contents = doc.get(node, "Contents")
        chunks: list[bytes] = []
        items = contents if isinstance(contents, list) else [contents]
        for item in items:
            item = doc.resolve(item)
            if isinstance(item, PdfStream):
                chunks.append(item.data(doc.warnings))
        xobjects = doc.get(resources, "XObject") if isinstance(resources, dict) else None
        has_xobject_image = False
        if isinstance(xobjects, dict):
            for ref in xobjects.values():
                xo = doc.resolve(ref)
                if isinstance(xo, PdfStream):
                    st = doc.get(xo.info, "Subtype")
                    if isinstance(st, PdfName) and st.value == "Image":
                        has_xobject_image = True
        text, saw_image = _page_text(doc, b"\n".join(chunks), fonts)
        pages.append(ExtractedPage(text=text, has_images=saw_image or has_xobject_image))

    total_text = "".join(p.text for p in pages).strip()
    if not total_text and any(p.has_images for p in pages):
        raise NoTextLayer("pages contain images but no extractable text")
    return ExtractedDocument(pages=pages, warnings=doc.warnings)
