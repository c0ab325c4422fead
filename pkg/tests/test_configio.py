import pytest

from hyperparallel import configio
from hyperparallel.errors import ConfigError


@pytest.mark.parametrize("text, seconds", [("10ms", 0.01), ("200ns", 2e-7), ("2us", 2e-6), ("2µs", 2e-6),
                                           ("1.5s", 1.5), (0.25, 0.25), (3, 3.0)])
def test_parse_seconds(text, seconds):
    assert configio.parse_seconds(text, "t") == pytest.approx(seconds)


@pytest.mark.parametrize("bad", ["fast", "10 parsecs", True, None, [1]])
def test_parse_seconds_rejects(bad):
    with pytest.raises(ConfigError):
        configio.parse_seconds(bad, "t")


def test_parse_number_accepts_yaml_exponent_strings():
    doc = configio.loads("bw: 1.0e11\n")
    assert isinstance(doc["bw"], str)  # YAML 1.1 leaves this as text
    assert configio.parse_number(doc["bw"], "bw") == 1e11


def test_line_numbers_recorded():
    doc = configio.loads("a: 1\nb:\n  c: 2\n", "f.yaml")
    assert doc.source == "f.yaml"
    assert doc.line_of("b") == 2
    assert doc["b"].line_of("c") == 3
    err = configio.fail("bad c", doc["b"], "c")
    assert err.located() == "f.yaml:3: bad c"


def test_malformed_document_has_line():
    with pytest.raises(ConfigError) as exc:
        configio.loads("a: [1, 2\nb: 3\n", "x.yaml")
    assert exc.value.source == "x.yaml"
    assert exc.value.line is not None


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        configio.load_file(tmp_path / "nope.yaml")
