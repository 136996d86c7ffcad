import pytest

from hybridoc import units
from hybridoc.errors import ConfigError


@pytest.mark.parametrize('text, mhz', [
    ('15.9 MHz', 15.9),
    ('12 kHz', 0.012),
    ('10.188 GHz', 10188.0),
    ('150 Hz', 1.5e-4),
    ('-1 GHz', -1000.0),
    ('1e3 kHz', 1.0),
])
def test_frequency(text, mhz):
    assert units.frequency(text) == pytest.approx(mhz, rel=1e-12)


def test_temperature_and_duration():
    assert units.temperature('25 mK') == 25.0
    assert units.temperature('0.01 K') == pytest.approx(10.0)
    assert units.duration('5 ns') == pytest.approx(0.005)
    assert units.duration('1 us') == 1.0
    assert units.duration('2 ms') == 2000.0


@pytest.mark.parametrize('value', ['15.9', 15.9, '15.9 THz', 'fast MHz', '15.9 mK', ''])
def test_rejects_bad_frequency(value):
    with pytest.raises(ConfigError) as err:
        units.frequency(value, 'Om')
    assert err.value.field == 'Om'
    assert "field 'Om'" in str(err.value)


def test_format_frequency():
    assert units.format_frequency(0.012) == '12 kHz'
    assert units.format_frequency(15.9) == '15.9 MHz'
    assert units.format_frequency(10188.0) == '10.19 GHz'
    assert units.format_frequency(1.5e-4) == '150 Hz'
