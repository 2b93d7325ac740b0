def gcd(a: int, b: int) -> int:
    """Greatest common divisor of two non-negative integers."""
    if a < 0 or b < 0:
        raise ValueError('arguments must be non-negative')
    while b:
        a, b = b, a % b
    return a
