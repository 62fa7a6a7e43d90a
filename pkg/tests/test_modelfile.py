import textwrap

import pytest

from condspec.errors import SpecParseError
from condspec.modelfile import dump_model, load_model, parse_model
from condspec.models import LambdaFn, ModelSpec


def parse(text):
    return parse_model(textwrap.dedent(text), "m.yaml")


def test_poisson_power_full():
    spec = parse(
        """\
        family: poisson-power
        q: 2.5
        A: 3
        lambda:
          kind: log-power
          value: 2
          power: 0.5
        tau: 1e-10
        """
    )
    ref = ModelSpec.poisson_power(A=3.0, q=2.5, lam=LambdaFn.log_power(2.0, 0.5), tau=1e-10)
    assert spec.fingerprint() == ref.fingerprint()


def test_forest_defaults():
    spec = parse("family: forest-unlabelled-rooted\nhorizon: 120\n")
    assert spec.q == 0.5 and spec.horizon == 120


def test_custom_table():
    spec = parse(
        """\
        family: custom-table
        q: 1.5
        beyond: zero
        table:
          - [1, 0, 0.5]
          - [1, 1, 0.5]
          - [2, 0, 0.75]
          - [2, 2, 0.25]
        """
    )
    assert spec.species_pmf(2)[2] == 0.25
    assert spec.species_pmf(5)[0] == 1.0


@pytest.mark.parametrize(
    "text,line,match",
    [
        ("family: poisson-power\nq: -1\n", 2, "positive"),
        ("family: poisson-power\nq: 1.5\nhorizon: 3\n", 3, "not allowed"),
        ("q: 1.5\n", 1, "family"),
        ("family: nonsense\n", 1, "unknown family"),
        ("family: poisson-power\nlambda:\n  kind: wiggly\n", 3, "lambda kind"),
        ("family: custom-table\ntable:\n  - [1, 0, 0.5]\n  - [1, 0.5]\n", 4, "row"),
        ("family: custom-table\ntable:\n  - [1, 0, 0.5]\n  - [2, 0, 1.0]\n", 3, "j=1"),
        ("family: poisson-power\nq: [1, 2]\n", 2, "single value"),
        ("family: poisson-power\n  q: : 1\n", 2, "YAML"),
        ("family: forest-unlabelled-unrooted\nhorizon: many\n", 2, "integer"),
        ("family: poisson-power\nq: 1.5\nq: 2\n", 3, "duplicate"),
    ],
)
def test_errors_cite_lines(text, line, match):
    with pytest.raises(SpecParseError, match=match) as exc:
        parse_model(text, "bad.yaml")
    assert exc.value.line == line
    assert f"bad.yaml:line {line}" in str(exc.value)


@pytest.mark.parametrize(
    "spec",
    [
        ModelSpec.poisson_power(A=2.0, q=0.75, tilt=0.5),
        ModelSpec.forest("unlabelled-unrooted", horizon=90),
        ModelSpec.forest("labelled-rooted"),
        ModelSpec.custom({1: [0.25, 0.75, 0.0], 4: [0.5, 0.5]}, q=1.0, beyond="error"),
    ],
)
def test_round_trip(spec, tmp_path):
    path = tmp_path / "m.yaml"
    path.write_text(dump_model(spec))
    assert load_model(path).fingerprint() == spec.fingerprint()
