import json
import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from skewthermo.io import config_hash, csv_text, dumps, fmt


def test_fmt():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(3) == "3" and fmt(np.int64(4)) == "4"
    assert fmt(True) == "true"
    assert (fmt(math.nan), fmt(math.inf), fmt(-math.inf)) == ("NaN", "Infinity", "-Infinity")


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x


def test_dumps_sorted_and_parseable():
    doc = {"b": [1, 2.5], "a": {"z": np.float64(0.25), "y": np.array([1, 2])}, "c": None}
    text = dumps(doc)
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert json.loads(text) == {"a": {"y": [1, 2], "z": 0.25}, "b": [1, 2.5], "c": None}


@given(st.dictionaries(st.text(max_size=5), st.floats(allow_nan=False) | st.integers() | st.text(max_size=5)))
def test_hash_ignores_key_order(d):
    rev = dict(reversed(list(d.items())))
    assert config_hash(d) == config_hash(rev)
    assert len(config_hash(d)) == 16


def test_csv_text():
    assert csv_text(["t", "P"], [(0.5, 1), ("x", 2.0)]) == "t,P\n0.5,1\nx,2\n"
