"""
Principal branch of the Lambert W function on [−1/e, ∞) by Halley iteration.
"""
import math

from plugins.common.errors import DomainError

BRANCH_POINT = -1.0 / math.e
MAX_ITERATIONS = 100


def _initial_guess(x):
    if x < -0.25:
        # series around the branch point in p = sqrt(2(e·x + 1))
        p = math.sqrt(max(0.0, 2.0 * (math.e * x + 1.0)))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    if x < 3.0:
        return math.log1p(x) * (1.0 - math.log1p(math.log1p(x)) / (2.0 + math.log1p(x)))
    lx = math.log(x)
    return lx - math.log(lx)


def lambert_w0(x, tol=1e-15):
    """
    W_0(x): the solution w >= −1 of w·e^w = x.

    Args:
        x: Real argument, x >= −1/e
        tol: Relative step tolerance for stopping

    Returns:
        W_0(x) as a float

    Raises:
        DomainError: x < −1/e or not finite
    """
    x = float(x)
    if not math.isfinite(x):
        raise DomainError("Lambert W argument must be finite", param_info=f"x = {x}")
    if x < BRANCH_POINT:
        if x > BRANCH_POINT - 1e-15:
            x = BRANCH_POINT
        else:
            raise DomainError(
                "Lambert W_0 is undefined below −1/e",
                param_info=f"x = {x!r}",
                suggestion="The principal branch needs x >= −1/e ≈ −0.36788."
            )
    if x == BRANCH_POINT:
        return -1.0
    if x == 0.0:
        return 0.0

    w = _initial_guess(x)
    for _ in range(MAX_ITERATIONS):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denominator = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denominator == 0.0:
            break
        step = f / denominator
        w -= step
        if abs(step) <= tol * (1.0 + abs(w)):
            break
    return max(w, -1.0)
