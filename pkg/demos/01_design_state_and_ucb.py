"""Walk through the numerical kernel behind every UCB policy.

A design state accumulates rank-one context updates while keeping its
inverse cached; the Mahalanobis norm under that inverse is the width of
the confidence ellipsoid, which shrinks exactly where feedback arrives.
"""

import numpy as np

from banditrec.glm import DesignState, GlmCoefficients, sigmoid

rng = np.random.default_rng(0)

print("== design state: uncertainty shrinks where you look ==")
st = DesignState(4)
probe = np.array([1.0, 0.0, 0.0, 1.0])
elsewhere = np.array([0.0, 1.0, -1.0, 0.0])
print(f"fresh state:      width(probe) = {st.mahalanobis(probe):.4f}   width(elsewhere) = {st.mahalanobis(elsewhere):.4f}")
for k in range(5):
    st.absorb(probe)
    print(f"after absorb #{k + 1}: width(probe) = {st.mahalanobis(probe):.4f}   width(elsewhere) = {st.mahalanobis(elsewhere):.4f}")

print("\ncached inverse vs direct inversion:",
      f"{np.max(np.abs(st.Minv - np.linalg.inv(st.M))):.2e}")

print("\n== logistic coefficients learn click probabilities ==")
coef = GlmCoefficients(4, learning_rate=0.05)
w_true = np.array([1.5, -2.0, 0.5, 0.0])
X = rng.normal(size=(200, 4))
y = (rng.random(200) < sigmoid(X @ w_true)).astype(float)
for epoch in range(200):
    coef.step(list(zip(X, y)))
print("recovered direction (cosine with truth):",
      round(float(coef.theta @ w_true / (np.linalg.norm(coef.theta) * np.linalg.norm(w_true))), 3))

print("\n== a UCB acquisition score in one line ==")
x = rng.normal(size=4)
score = sigmoid(float(x @ coef.theta)) + 0.1 * st.mahalanobis(x)
print(f"score = predicted {sigmoid(float(x @ coef.theta)):.3f} + 0.1 x width {st.mahalanobis(x):.3f} = {score:.3f}")
