import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from constellation.core import Constellation
from constellation.io import FormatError, parse, read_mnu, render, write_mnu
from constellation.synth import generate


def test_render_format():
    c = Constellation(np.array([[1.5, -2, math.pi]]), id="abc")
    assert render(c) == "MNU 1 abc\n1.500000 -2.000000 180.000000\n"
    assert render(Constellation(np.zeros((0, 3)))) == "MNU 1\n"


def test_parse_comments_and_degrees():
    c = parse("# leading comment\nMNU 1 f\n\n10 20 90  # trailing\n  30 40 -90\n")
    assert c.id == "f"
    assert c.points[0] == pytest.approx((10, 20, math.pi / 2))
    assert c.points[1] == pytest.approx((30, 40, 3 * math.pi / 2))


def test_text_round_trip_is_exact():
    for seed in range(5):
        text = render(generate(40, seed=seed, id=f"s{seed}"))
        assert render(parse(text)) == text


@given(st.lists(st.tuples(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.floats(0, 2 * math.pi)), max_size=20, unique_by=lambda t: (round(t[0], 3), round(t[1], 3))))
def test_round_trip_property(rows):
    c = Constellation(np.array(rows, dtype=float).reshape(-1, 3), id="h")
    text = render(c)
    back = parse(text)
    assert render(back) == text
    assert np.allclose(back.xy, c.xy, atol=5e-7)


def test_file_round_trip(tmp_path):
    c = generate(10, seed=1, id="file")
    write_mnu(tmp_path / "a.mnu", c)
    assert render(read_mnu(tmp_path / "a.mnu")) == render(c)


@pytest.mark.parametrize(
    "text, line, msg",
    [
        ("", 0, "missing header"),
        ("MNX 1\n", 1, "expected header"),
        ("MNU 2\n", 1, "unsupported version"),
        ("MNU 1\n1 2\n", 2, "field"),
        ("MNU 1\n# c\n1 2 3\n1 2 x\n", 4, "non-numeric"),
        ("MNU 1\n1 2 inf\n", 2, "non-finite"),
        ("MNU 1\n1 2 3\n5 5 5\n1 2 4\n", 4, "duplicate of the minutia on line 2"),
    ],
)
def test_malformed_files(text, line, msg):
    with pytest.raises(FormatError, match=msg) as e:
        parse(text, source="x.mnu")
    assert e.value.line == line
    if line:
        assert f"x.mnu:{line}:" in str(e.value)
