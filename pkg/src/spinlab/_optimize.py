import math

INV_PHI = (math.sqrt(5) - 1) / 2


def golden_section_min(f, a: float, b: float, tol: float = 1e-10, max_iter: int = 200):
    """Minimize a unimodal ``f`` on [a, b] to an absolute bracket width ``tol``.

    Returns (x, f(x)).
    """
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def golden_section_max(f, a: float, b: float, tol: float = 1e-10, max_iter: int = 200):
    x, fx = golden_section_min(lambda t: -f(t), a, b, tol, max_iter)
    return x, -fx
