"""Writes the synthetic logistic-regression fixtures in data/.

Shapes mirror the UCI Ionosphere (351 x 34) and Sonar (208 x 60) sets; the
values are drawn from a fixed latent logistic model, not the real data.
"""
import numpy as np
from pathlib import Path

out = Path(__file__).resolve().parent.parent / "data"
out.mkdir(exist_ok=True)


def write(name, n, d, seed, lo, hi, constant_col=None):
    rng = np.random.default_rng(seed)
    latent = rng.normal(size=(n, 3))
    mix = rng.normal(size=(3, d))
    x = np.tanh(latent @ mix / np.sqrt(3) + 0.5 * rng.normal(size=(n, d)))
    x = lo + (hi - lo) * (x + 1) / 2
    if constant_col is not None:
        x[:, constant_col] = 0.0
    w = rng.normal(size=3)
    p = 1 / (1 + np.exp(-(latent @ w) * 1.5))
    y = (rng.uniform(size=n) < p).astype(int)
    rows = [f"{y[i]}," + ",".join(f"{v:.5f}" for v in x[i]) for i in range(n)]
    (out / name).write_text("\n".join(rows) + "\n")


write("ionosphere_synthetic.csv", 351, 34, 20220101, -1.0, 1.0, constant_col=1)
write("sonar_synthetic.csv", 208, 60, 20220102, 0.0, 1.0)
