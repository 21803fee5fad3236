#!/usr/bin/env python3
"""Extended-precision reference values for the frozen tests in `oracle_values.rs`.

Every quantity is evaluated from its closed form with mpmath at 60 digits,
without reusing any of the Rust code paths. Run with `python3 hyperbolic_oracle.py`
and paste the printed constants when the inputs change.
"""

from mpmath import mp, mpf, sqrt, acosh, acos, sinh, cosh, exp, log, fsum

mp.dps = 60


def dot(a, b):
    return fsum(x * y for x, y in zip(a, b))


def norm(a):
    return sqrt(dot(a, a))


def lift(space, k):
    return (sqrt(1 / k + dot(space, space)), list(space))


def inner(x, y):
    return -x[0] * y[0] + dot(x[1], y[1])


def dist(x, y, k):
    u = -k * inner(x, y)
    if u < 1:
        u = mpf(1)
    return acosh(u) / sqrt(k)


def sq_lorentzian(x, y, k):
    return -2 / k - 2 * inner(x, y)


def expmap(v, k):
    n = norm(v)
    if n == 0:
        return lift([mpf(0)] * len(v), k)
    t = sqrt(k) * n
    space = [sinh(t) / t * c for c in v]
    return lift(space, k)


def clip(v, r):
    n = norm(v)
    if r is None or n <= r:
        return list(v)
    return [c * r / n for c in v]


def ext(x, y, k):
    m = k * inner(x, y)
    num = y[0] + x[0] * m
    den = norm(x[1]) * sqrt(m * m - 1)
    r = num / den
    r = max(mpf(-1), min(mpf(1), r))
    return acos(r)


def lse(vals):
    m = max(vals)
    return m + log(fsum(exp(v - m) for v in vals))


def sim(kind, a, c, k, tau):
    if kind == "distance":
        return -dist(a, c, k) / tau
    return ext(a, c, k) / tau


def score(kind, i, y, cands, k, tau):
    num = exp(sim(kind, cands[i], y, k, tau))
    den = fsum(exp(sim(kind, cands[i], c, k, tau)) for n, c in enumerate(cands) if n != i)
    return num / den


def losses(view_a, view_b, labels, k, tau, r):
    A = [expmap(clip(v, r), k) for v in view_a]
    B = [expmap(clip(v, r), k) for v in view_b]
    out = {}
    for kind in ("distance", "angle"):
        unsup = []
        sup = []
        for own, other in ((A, B), (B, A)):
            n = len(own)
            for i in range(n):
                cands = [own[j] for j in range(n) if j != i] + [other[i]]
                lz = lse([sim(kind, own[i], c, k, tau) for c in cands])
                unsup.append(lz - sim(kind, own[i], other[i], k, tau))
                if labels[i] is None:
                    continue
                pos = [q for q in range(n) if q != i and labels[q] == labels[i]]
                if not pos:
                    continue
                sup.append(fsum(lz - sim(kind, own[i], own[q], k, tau) for q in pos) / len(pos))
        out[kind] = (fsum(unsup) / len(unsup), fsum(sup) / len(sup) if sup else mpf(0))
    return out


def total(parts, alpha, lam):
    (ud, sd), (ua, sa) = parts["distance"], parts["angle"]
    ls = (1 - alpha) * sd + alpha * sa
    lu = (1 - alpha) * ud + alpha * ua
    return (1 - lam) * ls + lam * lu


def emit(name, value):
    print(f"pub const {name}: f64 = {mp.nstr(value, 25, strip_zeros=False)};")


if __name__ == "__main__":
    k005 = mpf("0.05")
    x = lift([mpf(1), mpf(2)], k005)
    y = lift([mpf(-1), mpf("0.5")], k005)
    emit("INNER_K005", inner(x, y))

    emit("LIFT_TIME_K005", lift([mpf("0.7"), mpf("-0.2"), mpf("0.1")], k005)[0])

    k1 = mpf(1)
    emit("DIST_K1_INNER_M2", dist((sqrt(2), [mpf(1), mpf(0)]), (sqrt(2), [mpf(0), mpf(1)]), k1))

    p = lift([mpf("0.3"), mpf("-1.2"), mpf("0.8")], k005)
    q = lift([mpf("-0.5"), mpf("0.4"), mpf("2.0")], k005)
    emit("SQ_LORENTZIAN_K005", sq_lorentzian(p, q, k005))
    emit("DIST_PAIR_K005", dist(p, q, k005))

    e = expmap([mpf("2.3"), mpf(0), mpf(0)], k005)
    emit("EXPMAP_SPACE_NORM_2_3", norm(e[1]))
    emit("EXPMAP_TIME_2_3", e[0])

    batch = [
        [mpf("0.40"), mpf("-0.10"), mpf("0.25")],
        [mpf("-0.35"), mpf("0.60"), mpf("0.05")],
        [mpf("1.10"), mpf("0.20"), mpf("-0.70")],
        [mpf("0.05"), mpf("-0.90"), mpf("0.45")],
        [mpf("-1.30"), mpf("-0.40"), mpf("0.80")],
        [mpf("0.70"), mpf("0.90"), mpf("0.60")],
        [mpf("-0.20"), mpf("0.15"), mpf("-1.05")],
        [mpf("0.95"), mpf("-0.55"), mpf("-0.30")],
    ]
    pts = [expmap(v, k005) for v in batch]
    tau = mpf("0.07")
    emit("SCORE_DISTANCE_B8", score("distance", 0, pts[3], pts, k005, tau))
    emit("SCORE_ANGLE_B8", score("angle", 2, pts[5], pts, k005, tau))
    emit("EXT_B8_0_1", ext(pts[0], pts[1], k005))
    emit("EXT_B8_1_0", ext(pts[1], pts[0], k005))

    view_a = [
        [mpf("0.50"), mpf("-0.20"), mpf("0.30")],
        [mpf("0.45"), mpf("-0.10"), mpf("0.40")],
        [mpf("-0.80"), mpf("0.70"), mpf("-0.10")],
        [mpf("2.00"), mpf("1.50"), mpf("0.50")],
    ]
    view_b = [
        [mpf("0.55"), mpf("-0.25"), mpf("0.20")],
        [mpf("0.40"), mpf("0.00"), mpf("0.45")],
        [mpf("-0.70"), mpf("0.80"), mpf("-0.20")],
        [mpf("1.80"), mpf("1.70"), mpf("0.40")],
    ]
    labels = [0, 0, 1, None]
    parts = losses(view_a, view_b, labels, k005, tau, mpf("2.3"))
    emit("LOSS_UNSUP_DISTANCE", parts["distance"][0])
    emit("LOSS_SUP_DISTANCE", parts["distance"][1])
    emit("LOSS_UNSUP_ANGLE", parts["angle"][0])
    emit("LOSS_SUP_ANGLE", parts["angle"][1])
    emit("LOSS_TOTAL_ALPHA_0_3", total(parts, mpf("0.3"), mpf("0.35")))
    noclip = losses(view_a, view_b, labels, k005, tau, None)
    emit("LOSS_TOTAL_NOCLIP_ALPHA_0_3", total(noclip, mpf("0.3"), mpf("0.35")))
