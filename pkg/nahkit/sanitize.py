"""Strict parsing of the textual forms used in model files and on the command line.

Rationals are written as "n" or "n/d" with no decimal point; words in the
group generators are written as comma separated signed 1-based indices.
"""

import re
from fractions import Fraction
from typing import Any

# Decimal-free rational: optional sign, digits, optional "/digits".
RATIONAL_PATTERN = re.compile(r"^([+-]?\d+)(?:/(\d+))?$")

# Signed nonzero generator index.
LETTER_PATTERN = re.compile(r"^[+-]?[1-9]\d*$")


def parse_rational(value: Any) -> Fraction:
    """Parse a rational given as "n", "n/d", an int or a Fraction.

    Raises:
        ValueError: If the value is not an exact rational. Floats and bools
                    are refused so that no binary rounding sneaks in.
    """
    if isinstance(value, bool):
        raise ValueError(f"invalid rational {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if not isinstance(value, str):
        raise ValueError(
            f"invalid rational {value!r}: expected a string, "
            f"got {type(value).__name__}"
        )

    match = RATIONAL_PATTERN.match(value.strip())
    if match is None:
        raise ValueError(f"invalid rational {value!r}")
    numerator, denominator = match.groups()
    if denominator is not None and int(denominator) == 0:
        raise ValueError(f"invalid rational {value!r}: zero denominator")
    return Fraction(int(numerator), int(denominator or 1))


def format_rational(value: Fraction | int) -> str:
    """Canonical text for a rational: reduced, "n" when integral."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def parse_word(value: Any) -> tuple[int, ...]:
    """Parse a word in the generators.

    Accepts a list of nonzero ints or a string such as "1,-2,1". The empty
    string and the empty list both denote the identity.
    """
    if isinstance(value, str):
        text = value.strip()
        if not text:
            return ()
        letters = [part.strip() for part in text.split(",")]
        for letter in letters:
            if not LETTER_PATTERN.match(letter):
                raise ValueError(f"invalid letter {letter!r} in word {value!r}")
        return tuple(int(letter) for letter in letters)

    if not isinstance(value, (list, tuple)):
        raise ValueError(
            f"word must be a list of signed indices, got {type(value).__name__}"
        )
    for letter in value:
        if isinstance(letter, bool) or not isinstance(letter, int):
            raise ValueError(f"invalid letter {letter!r}: expected an int")
        if letter == 0:
            raise ValueError("generator indices are 1-based; 0 is not a letter")
    return tuple(value)


def format_word(word: tuple[int, ...]) -> str:
    return ",".join(str(letter) for letter in word)
