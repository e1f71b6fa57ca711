"""Brute-force oracle for the confounder-affected-by-exposure scenario.

Independent of the C++ engine: enumerates all 2^(2*t0) states directly from
the structural equations, calibrates intercepts by scipy's brentq on the
exact marginals, and prints the quantities the C++ tests freeze.
"""
import itertools
import math
import sys

from scipy.optimize import brentq


def expit(z):
    return 1.0 / (1.0 + math.exp(-z))


def node_list(t0):
    out = []
    for t in range(1, t0 + 1):
        out.append(("W", t))
        out.append(("X", t))
    return out


def cond_prob(node, vals, p, c):
    kind, t = node
    alpha, beta, gamma, rho = p["alpha"], p["beta"], p["gamma"], p["rho"]
    if kind == "W":
        if t == 1:
            z = c[node]
        else:
            z = gamma * sum(vals[("W", s)] for s in range(1, t)) + rho * alpha * vals[("X", t - 1)] + c[node]
    else:
        z = alpha * sum(vals[("W", s)] for s in range(1, t + 1)) + c[node]
        if t > 1:
            z += beta * vals[("X", t - 1)]
    return expit(z)


def joint(p, c, t0, upto=None, do=None):
    nodes = node_list(t0)
    if upto is not None:
        nodes = nodes[:upto]
    table = {}
    for bits in itertools.product((0, 1), repeat=len(nodes)):
        vals = dict(zip(nodes, bits))
        pr = 1.0
        for n in nodes:
            if do is not None and n in do:
                pr *= 1.0 if vals[n] == do[n] else 0.0
                continue
            q = cond_prob(n, vals, p, c)
            pr *= q if vals[n] == 1 else 1.0 - q
            if pr == 0.0:
                break
        if pr > 0.0:
            table[bits] = pr
    return nodes, table


def calibrate(p, t0, target=0.1):
    c = {}
    nodes = node_list(t0)
    for k, n in enumerate(nodes):
        def f(ck):
            c[n] = ck
            ns, tab = joint(p, c, t0, upto=k + 1)
            return sum(pr for b, pr in tab.items() if b[k] == 1) - target
        c[n] = brentq(f, -40, 40, xtol=1e-14, rtol=1e-15)
    return c


def summaries(nodes, bits, t0, tau):
    vals = dict(zip(nodes, bits))
    xs = 1 if sum(vals[("X", t)] for t in range(1, t0 + 1)) >= tau else 0
    ws = 1 if sum(vals[("W", t)] for t in range(1, t0 + 1)) >= tau else 0
    return vals, xs, ws


def analyse(alpha, rho, mu_w, t0=5, tau=3):
    p = dict(alpha=alpha, beta=1.0, gamma=1.0, rho=rho)
    c = calibrate(p, t0)
    nodes, tab = joint(p, c, t0)
    mean = lambda xs, ws: 1.0 + 1.0 * xs - mu_w * ws
    # observational quantities
    acc = {}
    prof = {}
    for bits, pr in tab.items():
        vals, xs, ws = summaries(nodes, bits, t0, tau)
        key = (xs, ws)
        a = acc.setdefault(key, [0.0, 0.0])
        a[0] += pr
        a[1] += pr * mean(xs, ws)
        xp = "".join(str(vals[("X", t)]) for t in range(1, t0 + 1))
        d = prof.setdefault(xs, {})
        d[xp] = d.get(xp, 0.0) + pr
    pw = {w: sum(acc.get((x, w), [0, 0])[0] for x in (0, 1)) for w in (0, 1)}
    conf = sum((acc[(1, w)][1] / acc[(1, w)][0] - acc[(0, w)][1] / acc[(0, w)][0]) * pw[w] for w in (0, 1))
    px = {x: sum(acc[(x, w)][0] for w in (0, 1)) for x in (0, 1)}
    med = sum(acc[(1, w)][1] for w in (0, 1)) / px[1] - sum(acc[(0, w)][1] for w in (0, 1)) / px[0]
    # interventional means
    imean = {}
    for xbits in itertools.product((0, 1), repeat=t0):
        do = {("X", t + 1): xbits[t] for t in range(t0)}
        ns, itab = joint(p, c, t0, do=do)
        imean["".join(map(str, xbits))] = sum(pr * mean(*summaries(ns, b, t0, tau)[1:]) for b, pr in itab.items())
    pairs = []
    for x1, w1 in prof[1].items():
        for x0, w0 in prof[0].items():
            pairs.append((w1 / px[1] * w0 / px[0], x1, x0, imean[x1] - imean[x0]))
    pairs.sort(reverse=True)
    wavg = sum(w * a for w, _, _, a in pairs)
    return c, conf, med, wavg, pairs


if __name__ == "__main__":
    alpha, rho, mu_w = (float(v) for v in sys.argv[1:4])
    c, conf, med, wavg, pairs = analyse(alpha, rho, mu_w)
    order = node_list(5)
    print("intercepts W:", ["%.17g" % c[("W", t)] for t in range(1, 6)])
    print("intercepts X:", ["%.17g" % c[("X", t)] for t in range(1, 6)])
    print("ate_sv_conf %.17g" % conf)
    print("ate_sv_med  %.17g" % med)
    print("wavg_eq5    %.17g" % wavg)
    cum = 0.0
    for w, a, b, ate in pairs[:5]:
        cum += w
        print("pair %s;%s weight %.6f cum %.6f ate %.6f" % (a, b, w, cum, ate))
