"""Hand-computed Knapp-Hartung / Wald example with direct matrix arithmetic.

Four subjects, zero within-subject variance: REML between-subject variance is
the n-1 sample variance, Sigma is proportional to I and SR equals one.
Also a heteroscedastic example solved with a brute-force grid REML.
"""
import numpy as np
from scipy.stats import t as tdist

d = np.array([1.0, 2.0, 3.0, 6.0])
n = len(d)
s2 = d.var(ddof=1)
Sigma = s2 * np.eye(n)
Si = np.linalg.inv(Sigma)
one = np.ones(n)
v_eta = 1.0 / (one @ Si @ one)
eta = v_eta * (one @ Si @ d)
P = Si - np.outer(Si @ one, one @ Si) * v_eta
SR = d @ P @ d / (n - 1)
T = eta / np.sqrt(SR * v_eta)
print("iid: eta=%.12g s2=%.12g SR=%.12g T=%.12g p=%.12g" % (eta, s2, SR, T, 2 * tdist.sf(abs(T), n - 1)))

# heteroscedastic: brute force REML on a fine grid then golden refine
g = np.array([0.3, -0.1, 0.8, 1.4, 0.2])
v = np.array([0.05, 0.2, 0.1, 0.4, 0.02])


def reml(tau):
    w = 1 / (tau + v)
    eta = (w @ g) / w.sum()
    return -0.5 * (np.log(tau + v).sum() + np.log(w.sum()) + (w * (g - eta) ** 2).sum())


grid = np.linspace(0, 10, 2000001)
vals = np.array([reml(x) for x in grid[::100]])
i = int(np.argmax(vals))
from scipy.optimize import minimize_scalar
lo, hi = grid[::100][max(i - 1, 0)], grid[::100][min(i + 1, len(vals) - 1)]
r = minimize_scalar(lambda x: -reml(x), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
tau = r.x if r.x > 1e-9 else 0.0
w = 1 / (tau + v)
eta = (w @ g) / w.sum()
veta = 1 / w.sum()
Sigma = np.diag(tau + v)
Si = np.linalg.inv(Sigma)
P = Si - np.outer(Si @ np.ones(5), np.ones(5) @ Si) * veta
SR = g @ P @ g / 4
Tkh = eta / np.sqrt(SR * veta)
Tw = eta / np.sqrt(veta)
print("het: tau=%.10g eta=%.12g veta=%.12g SR=%.12g Tkh=%.12g pkh=%.12g Tw=%.12g pw=%.12g" % (
    tau, eta, veta, SR, Tkh, 2 * tdist.sf(abs(Tkh), 4), Tw, 2 * tdist.sf(abs(Tw), 4)))
