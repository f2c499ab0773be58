import io
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partlab.specfile import (
    CfpSettings,
    ComputeSettings,
    SpecDocument,
    SpecParseError,
    parse_spec,
    read_spec,
    serialize_spec,
)
from partlab.weights import Family, Preset, RegularlyVarying, Table, TailRule, rational_presets

VALID = """\
# uniform integer partitions
[structure]
family = multiset
generator = integer_partitions
p = 1/2

[compute]
N = 200
mode = exact
window = 25
tol = 1/1000

[cfp]
n = 6
gauge = ratio
t_max = 1000
seed = 12345
"""


def _errors(text, **kw):
    with pytest.raises(SpecParseError) as exc:
        parse_spec(text, **kw)
    return exc.value.errors


def test_valid_document():
    doc = parse_spec(VALID)
    assert doc.family is Family.MULTISET
    assert doc.generator == Preset("integer_partitions")
    assert doc.p == Fraction(1, 2)
    assert doc.compute == ComputeSettings(N=200, mode="exact", window=25, tol=0.001)
    assert doc.cfp == CfpSettings(n=6, gauge="ratio", t_max=1000.0, seed=12345)
    assert doc.warnings == ()


def test_p_out_of_range_is_positioned():
    (err,) = _errors("family = multiset\ngenerator = integer_partitions\np = 3/2\n")
    assert (err.line, err.column) == (3, 5)
    assert "p must satisfy 0<p<1" in err.message
    assert str(err).startswith("line 3, column 5:")


def test_rv_generator():
    doc = parse_spec("family = assembly\ngenerator = rv(1, -1, 1)\n")
    assert doc.generator == RegularlyVarying(Fraction(1), Fraction(-1), Fraction(1))
    assert doc.cfp is None


def test_keys_before_headers_and_comments():
    doc = parse_spec("family = assembly   # labelled\ngenerator = ewens(2)\nN = 50\n")
    assert doc.generator == Preset("ewens", (Fraction(2),))
    assert doc.compute.N == 50


def test_table_generator_and_tail_rule():
    doc = parse_spec("family = assembly\ngenerator = table[1, 1/2, 3; tail=repeat-last]\n")
    assert doc.generator == Table((Fraction(1), Fraction(1, 2), Fraction(3)), TailRule.REPEAT_LAST)
    assert "table[1, 1/2, 3; tail=repeat-last]" in serialize_spec(doc)
    (err,) = _errors("family = assembly\ngenerator = table[1, 2; tail=foo]\n")
    assert err.line == 2 and "tail rule" in err.message


def test_canonical_serialization_writes_defaults():
    doc = parse_spec("generator = permutations\nfamily = assembly\n")
    assert serialize_spec(doc) == (
        "[structure]\nfamily = assembly\ngenerator = permutations\n\n"
        "[compute]\nN = 200\nmode = exact\nwindow = 25\ntol = 0.001\nl_max = 5\n"
    )


def test_key_order_does_not_matter():
    lines = [ln for ln in VALID.splitlines() if ln and not ln.startswith(("#", "["))]
    shuffled = "\n".join(reversed(lines)) + "\n"
    assert serialize_spec(parse_spec(shuffled)) == serialize_spec(parse_spec(VALID))


def test_decimals_only_in_float_mode():
    (err,) = _errors("family = assembly\ngenerator = ewens(0.5)\n")
    assert (err.line, err.column) == (2, 13)
    assert "float mode" in err.message
    doc = parse_spec("family = assembly\ngenerator = ewens(0.5)\nmode = float\n")
    assert doc.generator == Preset("ewens", (Fraction(1, 2),))
    assert parse_spec("family = assembly\ngenerator = ewens(2)\ntol = 0.01\n").compute.tol == 0.01


INVALID = [
    ("family = assembly\n", 1, "missing required key 'generator'"),
    ("family = group\ngenerator = permutations\n", 1, "unknown family"),
    ("family = assembly\ngenerator = permutations\nN = -3\n", 3, "non-negative integer"),
    ("family = assembly\ngenerator = permutations\nwindow = 1\n", 3, "window must be >= 2"),
    ("family = assembly\ngenerator = permutations\ntol = 0\n", 3, "tol must be positive"),
    ("family = assembly\ngenerator = permutations\nmode = fast\n", 3, "expected one of exact, float"),
    ("family = assembly\ngenerator = permutations\nN = 10\nN = 20\n", 4, "duplicate key 'N'"),
    ("family = assembly\ngenerator = permutations\nbogus = 3\n", 3, "unknown key 'bogus'"),
    ("family = assembly\ngenerator = permutations\n[compute]\np = 1/2\n", 4, "belongs in [structure]"),
    ("family = assembly\ngenerator = permutations\njust words\n", 3, "expected key = value"),
    ("family = assembly\ngenerator = permutations\n[compute\n", 3, "malformed section header"),
    ("family = assembly\ngenerator = rv(1, 2)\n", 2, "takes 3 arguments"),
    ("family = assembly\ngenerator = permutations\ngauge = fancy\n", 3, "meanfield, ratio"),
    ("family = assembly\ngenerator = permutations\nt_max = -1\n", 3, "t_max must be >= 0"),
    ("family = multiset\ngenerator = integer_partitions\n", 1, "p"),
]


@pytest.mark.parametrize("text, line, fragment", INVALID)
def test_invalid_corpus_reports_position(text, line, fragment):
    errors = _errors(text)
    assert any(e.line == line and fragment in e.message for e in errors), errors
    assert all(e.column >= 1 for e in errors)


def test_all_errors_are_reported_together():
    errors = _errors("family = group\ngenerator = ewens(0.5)\nN = x\n")
    assert [e.line for e in errors] == [1, 2, 3]


def test_lenient_mode_turns_unknowns_into_warnings():
    text = "family = assembly\ngenerator = permutations\nbogus = 3\n[extra]\ncolour = red\n"
    with pytest.raises(SpecParseError):
        parse_spec(text)
    doc = parse_spec(text, lenient=True)
    assert doc.generator == Preset("permutations")
    assert [w.line for w in doc.warnings] == [3, 4, 5]


def test_read_spec_from_file_and_stdin(tmp_path, monkeypatch):
    path = tmp_path / "s.spec"
    path.write_text(VALID)
    assert read_spec(str(path)) == parse_spec(VALID)
    monkeypatch.setattr("sys.stdin", io.StringIO(VALID))
    assert read_spec("-") == parse_spec(VALID)


# round trip ---------------------------------------------------------------

PRESETS = rational_presets()
positive_rationals = st.fractions(min_value=Fraction(1, 9), max_value=5, max_denominator=9)


@st.composite
def documents(draw):
    spec = draw(st.sampled_from(sorted(PRESETS, key=str)).map(PRESETS.get))
    family, generator, p = spec.family, spec.params, spec.p
    if family is Family.ASSEMBLY and draw(st.booleans()):
        values = draw(st.lists(positive_rationals, min_size=1, max_size=6))
        generator = Table(tuple(values), draw(st.sampled_from([TailRule.ZERO, TailRule.REPEAT_LAST])))
    compute = ComputeSettings(
        N=draw(st.integers(0, 1000)),
        mode="exact",
        window=draw(st.integers(2, 50)),
        tol=draw(st.floats(min_value=1e-12, max_value=1.0)),
        l_max=draw(st.integers(0, 10)),
    )
    cfp = None
    if draw(st.booleans()):
        cfp = CfpSettings(
            n=draw(st.integers(1, 40)),
            gauge=draw(st.sampled_from(["meanfield", "ratio"])),
            t_max=draw(st.floats(min_value=0, max_value=1e6)),
            seed=draw(st.integers(0, 2**32)),
        )
    return SpecDocument(family, generator, p, compute, cfp)


@settings(max_examples=100, deadline=None)
@given(documents())
def test_serialize_parse_roundtrip(doc):
    text = serialize_spec(doc)
    again = parse_spec(text)
    assert again == doc
    assert serialize_spec(again) == text
