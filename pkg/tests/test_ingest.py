"""PDF parsing, serialization, head truncation and candidate blocks."""

import string

import pytest
from hypothesis import given, strategies as st
from reportlab.pdfbase import pdfmetrics
from reportlab.pdfbase.ttfonts import TTFont
from reportlab.pdfgen import canvas

from cmdb import ingest
from pdf_textdump import dump_text

DEJAVU = "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf"


def build_pdf(path, lines, unicode_font=False, compress=False):
    c = canvas.Canvas(str(path), pageCompression=1 if compress else 0, invariant=1)
    if unicode_font:
        pdfmetrics.registerFont(TTFont("DejaVuT", DEJAVU))
        c.setFont("DejaVuT", 11)
    pages = lines if isinstance(lines[0], list) else [lines]
    for page in pages:
        if unicode_font:
            c.setFont("DejaVuT", 11)
        y = 720
        for line in page:
            c.drawString(72, y, line)
            y -= 14
        c.showPage()
    c.save()
    return path


@pytest.fixture()
def hello_math_pdf(tmp_path):
    return build_pdf(tmp_path / "hello.pdf", ["Hello σ = Eε"], unicode_font=True)


class TestParsePdf:
    def test_inline_math_survives_with_candidate(self, hello_math_pdf):
        doc = ingest.parse_pdf(ingest.load_raw_document(hello_math_pdf))
        assert "σ = Eε" in doc.full_text
        clusters = [c for c in doc.equation_candidates
                    if c.kind == "inline_math_cluster"]
        assert len(clusters) == 1
        assert clusters[0].raw_text == "σ = Eε"

    def test_ascii_content_against_independent_dump(self, tmp_path):
        lines = ["A study of mortar strength.",
                 r"\[ \tau = c + \sigma_n \tan ( \phi ) \]",
                 "Measured cohesion c = 180 kPa."]
        path = build_pdf(tmp_path / "plain.pdf", lines)
        doc = ingest.parse_pdf(ingest.load_raw_document(path))
        oracle = dump_text(path.read_bytes())
        for line in lines:
            assert line in oracle
            assert line in doc.full_text

    def test_empty_page_pdf(self, tmp_path):
        path = tmp_path / "empty.pdf"
        c = canvas.Canvas(str(path), pageCompression=0, invariant=1)
        c.showPage()
        c.save()
        doc = ingest.parse_pdf(ingest.load_raw_document(path))
        assert doc.full_text == ""
        assert doc.char_count == 0
        assert doc.equation_candidates == []

    def test_image_only_pdf_raises_no_text_layer(self, tmp_path):
        from PIL import Image
        img_path = tmp_path / "sq.png"
        Image.new("RGB", (40, 40), "blue").save(img_path)
        path = tmp_path / "image.pdf"
        c = canvas.Canvas(str(path), invariant=1)
        c.drawImage(str(img_path), 100, 600, 80, 80)
        c.showPage()
        c.save()
        with pytest.raises(ingest.NoTextLayer):
            ingest.parse_pdf(ingest.load_raw_document(path))

    def test_malformed_pdf(self):
        with pytest.raises(ingest.MalformedPdf):
            ingest.parse_pdf(ingest.RawDocument.from_bytes(b"definitely not a pdf"))

    def test_encrypted_pdf(self, tmp_path):
        path = build_pdf(tmp_path / "enc.pdf", ["secret"])
        data = path.read_bytes()
        data = data.replace(b"trailer\n<<", b"trailer\n<< /Encrypt 99 0 R")
        with pytest.raises(ingest.EncryptedPdf):
            ingest.parse_pdf(ingest.RawDocument.from_bytes(data))

    def test_parse_is_deterministic(self, tmp_path):
        path = build_pdf(tmp_path / "det.pdf", ["stable text", r"\[ a = b \]"])
        raw = ingest.load_raw_document(path)
        assert ingest.parse_pdf(raw).to_json() == ingest.parse_pdf(raw).to_json()

    def test_compressed_stream_supported(self, tmp_path):
        path = build_pdf(tmp_path / "z.pdf", ["compressed body text"], compress=True)
        doc = ingest.parse_pdf(ingest.load_raw_document(path))
        assert "compressed body text" in doc.full_text

    def test_page_break_marker(self, tmp_path):
        path = build_pdf(tmp_path / "two.pdf", [["page one"], ["page two"]])
        doc = ingest.parse_pdf(ingest.load_raw_document(path))
        assert "page one\n\x0c\npage two" in doc.full_text

    def test_char_count_invariant(self, hello_math_pdf):
        doc = ingest.parse_pdf(ingest.load_raw_document(hello_math_pdf))
        assert doc.char_count == len(doc.full_text)

    def test_serialized_json_roundtrip(self, tmp_path, hello_math_pdf):
        doc = ingest.parse_pdf(ingest.load_raw_document(hello_math_pdf))
        out = doc.save(tmp_path / "ser")
        assert out.name == f"{doc.doc_id}.serialized.json"
        again = ingest.SerializedDoc.load(out)
        assert again.to_dict() == doc.to_dict()


def make_doc(text: str) -> ingest.SerializedDoc:
    doc = ingest.SerializedDoc(doc_id="t", full_text=text, char_count=len(text))
    doc.equation_candidates = ingest.segment_equation_candidates(doc)
    return doc


class TestSegmentation:
    def test_two_display_groups_in_order(self):
        doc = make_doc(r"intro \[x = 1\] middle \[y = 2\] end")
        display = [c for c in doc.equation_candidates if c.kind == "display_math"]
        assert [c.raw_text for c in display] == [r"\[x = 1\]", r"\[y = 2\]"]

    def test_no_math_no_candidates(self):
        assert make_doc("prose only, nothing mathematical").equation_candidates == []

    def test_environment_with_aligned_lines_is_one_block(self):
        text = ("before\n\\begin{align}\na &= b \\\\\nc &= d \\\\\ne &= f\n"
                "\\end{align}\nafter")
        display = [c for c in make_doc(text).equation_candidates
                   if c.kind == "display_math"]
        assert len(display) == 1

    def test_dollar_inline_candidates(self):
        doc = make_doc("we write $E = 2 G (1 + \\nu)$ in passing")
        inline = [c for c in doc.equation_candidates
                  if c.kind == "inline_math_cluster"]
        assert len(inline) == 1

    def test_unbalanced_display_recorded_not_dropped(self):
        doc = make_doc(r"broken \[ x = 1 without closer")
        assert any("UnbalancedDelimiters" in w for w in doc.parse_warnings)

    def test_tabular_region(self):
        doc = make_doc("\\begin{tabular}{cc} 1 & 2 \\\\ \\end{tabular}")
        assert [c.kind for c in doc.equation_candidates] == ["table_region"]

    def test_numeric_column_region(self):
        doc = make_doc("header line\n1.0 2.0 3.0\n4.0 5.0 6.0\ntail prose here")
        assert any(c.kind == "table_region" for c in doc.equation_candidates)

    def test_spans_ordered_nonoverlapping_within_text(self):
        doc = make_doc(r"a \[x=1\] $y$ mid 1.0 2.0" + "\n3.0 4.0\n" + r"\[z=2\]")
        spans = [c.span for c in doc.equation_candidates]
        assert spans == sorted(spans)
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            assert e1 <= s2
        for c in doc.equation_candidates:
            assert 0 <= c.span[0] < c.span[1] <= doc.char_count

    def test_span_integrity_exhaustive(self):
        doc = make_doc(r"x \[a=b\] and $c=d$ plus σ = Eε end")
        for c in doc.equation_candidates:
            assert doc.full_text[c.span[0]:c.span[1]] == c.raw_text

    def test_determinism(self):
        text = r"a \[x=1\] $y=2$ and 1.0 2.0" + "\n3.0 4.0"
        a = [c.to_dict() for c in make_doc(text).equation_candidates]
        b = [c.to_dict() for c in make_doc(text).equation_candidates]
        assert a == b


class TestTruncateHead:
    def test_long_doc_cut_at_whitespace(self):
        text = "word " * 4000  # 20000 chars
        head = ingest.truncate_head(make_doc(text.strip()), 8000)
        assert len(head.text) <= 8000
        assert head.truncated
        assert not head.text[-1].isspace()

    def test_short_doc_untouched(self):
        doc = make_doc("short " * 500)  # 3000 chars
        head = ingest.truncate_head(doc, 8000)
        assert head.text == doc.full_text
        assert not head.truncated

    def test_midtoken_cut_backs_off_to_whitespace(self):
        # oracle: scan backward from the limit for the first whitespace
        text = "a" * 7995 + " " + "b" * 100
        head = ingest.truncate_head(make_doc(text), 8000)
        assert head.text == "a" * 7995
        oracle_cut = max(i for i in range(8001) if text[i - 1].isspace())
        assert len(head.text) <= oracle_cut

    def test_unicode_scalars_not_bytes(self):
        text = ("σ" * 10 + " ") * 1000
        head = ingest.truncate_head(make_doc(text.strip()), 50)
        assert len(head.text) <= 50

    def test_limit_must_be_positive(self):
        with pytest.raises(ValueError):
            ingest.truncate_head(make_doc("x"), 0)


@given(st.text(alphabet=string.ascii_letters + " \n", max_size=400),
       st.integers(min_value=1, max_value=120))
def test_truncation_bound_property(text, limit):
    doc = ingest.SerializedDoc(doc_id="p", full_text=text, char_count=len(text))
    head = ingest.truncate_head(doc, limit)
    assert len(head.text) <= limit
    assert head.truncated == (len(text) > limit)


@given(st.text(alphabet=string.ascii_letters + " ", max_size=200),
       st.text(alphabet=string.ascii_letters + " ", max_size=200),
       st.integers(min_value=1, max_value=100))
def test_truncation_monotonicity_property(prefix, suffix, limit):
    # if A's text is a prefix of B's, A's head is a prefix of B's head
    # (or A's whole text)
    doc_a = ingest.SerializedDoc(doc_id="a", full_text=prefix,
                                 char_count=len(prefix))
    doc_b = ingest.SerializedDoc(doc_id="b", full_text=prefix + suffix,
                                 char_count=len(prefix + suffix))
    head_a = ingest.truncate_head(doc_a, limit)
    head_b = ingest.truncate_head(doc_b, limit)
    assert head_b.text.startswith(head_a.text) or head_a.text == prefix
