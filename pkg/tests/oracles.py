"""Naive reference implementations used to cross-check the package.

Everything here is written the slow, obvious way (explicit loops, direct
DFT summation, dict-based counting) so that agreement with the package is
evidence of correctness rather than shared structure.
"""

from __future__ import annotations

import math


def moving_average(samples, s):
    out = []
    for i in range(len(samples) - s + 1):
        out.append(sum(samples[i : i + s]) / s)
    return out


def quantile(samples, q):
    s = sorted(samples)
    n = len(s)
    h = (n - 1) * q
    lo = math.floor(h)
    if lo + 1 >= n:
        return s[-1]
    return s[lo] + (h - lo) * (s[lo + 1] - s[lo])


def central_moment(samples, k):
    mu = sum(samples) / len(samples)
    return sum((v - mu) ** k for v in samples) / len(samples)


def skewness(samples):
    m2 = central_moment(samples, 2)
    if m2 == 0:
        return 0.0
    return central_moment(samples, 3) / m2**1.5


def excess_kurtosis(samples):
    m2 = central_moment(samples, 2)
    if m2 == 0:
        return 0.0
    return central_moment(samples, 4) / m2**2 - 3.0


def mean_crossings(samples):
    mu = sum(samples) / len(samples)
    signs = [1 if v - mu >= 0 else -1 for v in samples]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def peak_count(samples):
    return sum(
        1
        for i in range(1, len(samples) - 1)
        if samples[i] > samples[i - 1] and samples[i] > samples[i + 1]
    )


def longest_run_below(samples):
    mu = sum(samples) / len(samples)
    best = run = 0
    for v in samples:
        run = run + 1 if v < mu else 0
        best = max(best, run)
    return best


def longest_run_above(samples):
    mu = sum(samples) / len(samples)
    best = run = 0
    for v in samples:
        run = run + 1 if v > mu else 0
        best = max(best, run)
    return best


def bin_counts(samples, bins):
    lo = min(samples)
    hi = max(samples)
    counts = [0] * bins
    if lo == hi:
        counts[0] = len(samples)
        return counts
    for v in samples:
        idx = int((v - lo) / (hi - lo) * bins)
        if idx == bins:
            idx = bins - 1
        counts[idx] += 1
    return counts


def dft_amplitudes(samples):
    """One-sided amplitude spectrum by direct summation, DC excluded."""
    n = len(samples)
    amps = []
    for k in range(1, n // 2 + 1):
        re = sum(samples[t] * math.cos(2 * math.pi * k * t / n) for t in range(n))
        im = -sum(samples[t] * math.sin(2 * math.pi * k * t / n) for t in range(n))
        amps.append(math.hypot(re, im))
    return amps


def std(samples):
    return math.sqrt(central_moment(samples, 2))


def plugin_mutual_information(bin_ids, labels):
    """Plug-in MI in nats from pre-binned feature values and labels."""
    n = len(bin_ids)
    joint = {}
    pb = {}
    pl = {}
    for b, lab in zip(bin_ids, labels):
        joint[(b, lab)] = joint.get((b, lab), 0) + 1
        pb[b] = pb.get(b, 0) + 1
        pl[lab] = pl.get(lab, 0) + 1
    mi = 0.0
    for (b, lab), c in joint.items():
        p_joint = c / n
        mi += p_joint * math.log(p_joint / ((pb[b] / n) * (pl[lab] / n)))
    return mi


def entropy(labels):
    n = len(labels)
    counts = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    return -sum((c / n) * math.log(c / n) for c in counts.values())


def histogram_intersection(p_counts, q_counts):
    return sum(min(a, b) for a, b in zip(p_counts, q_counts)) / sum(p_counts)


def pearson_r(xs, ys):
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(xs, ys)) / n
    vx = sum((a - mx) ** 2 for a in xs) / n
    vy = sum((b - my) ** 2 for b in ys) / n
    if vx == 0 or vy == 0:
        return 0.0
    return cov / math.sqrt(vx * vy)


def window_count(n, w, step):
    if n < w:
        return 0
    return (n - w) // step + 1


def rates(tp, fn, fp, tn):
    """(FAR, FRR, HTER) from raw accept/reject counts."""
    far = fp / (fp + tn)
    frr = fn / (fn + tp)
    return far, frr, (far + frr) / 2
