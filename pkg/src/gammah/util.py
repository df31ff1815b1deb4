"""Small shared helpers for CSV output."""
import math


def fmt(x) -> str:
    """Float with 17 significant digits; ``None`` becomes an empty field."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def csv_line(values) -> str:
    return ",".join(fmt(v) if not isinstance(v, str) else v for v in values)
