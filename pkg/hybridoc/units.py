"""Strict parsing of quantities with unit suffixes.

Frequencies come back in MHz, temperatures in mK and durations in µs.
"""
import re

from hybridoc.errors import ConfigError

FREQUENCY = {'Hz': 1e-6, 'kHz': 1e-3, 'MHz': 1.0, 'GHz': 1e3}
TEMPERATURE = {'mK': 1.0, 'K': 1e3}
DURATION = {'ns': 1e-3, 'us': 1.0, 'µs': 1.0, 'ms': 1e3}

_QUANTITY = re.compile(r'^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-zµ]+)\s*$')


def parse_quantity(text, table, field=None):
    """Parse '15.9 MHz' into a float in the internal unit of `table`."""
    if not isinstance(text, str):
        raise ConfigError('expected a string with a unit suffix, got %r' % (text,), field)
    match = _QUANTITY.match(text)
    if match is None:
        raise ConfigError('cannot parse quantity %r' % text, field)
    value, unit = match.groups()
    if unit not in table:
        raise ConfigError('unknown unit %r, expected one of %s'
                          % (unit, ', '.join(sorted(table))), field)
    return float(value) * table[unit]


def frequency(text, field=None):
    return parse_quantity(text, FREQUENCY, field)


def temperature(text, field=None):
    return parse_quantity(text, TEMPERATURE, field)


def duration(text, field=None):
    return parse_quantity(text, DURATION, field)


def format_frequency(mhz):
    """Pick a readable unit for a frequency given in MHz."""
    magnitude = abs(mhz)
    if magnitude >= 1e3:
        return '%.4g GHz' % (mhz / 1e3)
    if magnitude >= 1.0 or magnitude == 0.0:
        return '%.4g MHz' % mhz
    if magnitude >= 1e-3:
        return '%.4g kHz' % (mhz * 1e3)
    return '%.4g Hz' % (mhz * 1e6)
