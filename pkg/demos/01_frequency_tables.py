# %% [markdown]
# Incremental categorical Naive Bayes
#
# A FrequencyTable keeps integer counts per (class, feature, value) and turns
# them into smoothed probabilities on demand. Every feature domain gets an
# extra ABSENT value for "no observation".

# %%
from bmaniac import ABSENT, FrequencyTable

t = FrequencyTable(["C", "notC"], [("f", ["A", "B"]), ("h", [1, 2])], alpha=0)
for i in range(40):
    t.observe("C", {"f": "A" if i < 20 else "B", "h": 2 if i < 16 else 1})
for i in range(10):
    t.observe("notC", {"f": "A" if i < 5 else "B", "h": 2 if i < 9 else 1})

print("domains:", t.domains)
print("P(C)       =", t.prior("C"))
print("P(f=A|C)   =", t.conditional("f", "A", "C"))
print("P(h=2|C)   =", t.conditional("h", 2, "C"))

# %% [markdown]
# Two ways to condition on evidence. `posterior` normalizes over classes;
# `posterior_literal` divides by the product of feature marginals and clamps.

# %%
ev = {"f": "A", "h": 2}
print("normalized:", t.posterior("C", ev))
print("literal:   ", t.posterior_literal("C", ev))  # 0.8 * 0.5 * 0.4 / (0.5 * 0.5)

# %% [markdown]
# Laplace smoothing keeps unseen values away from zero.

# %%
smooth = FrequencyTable(["C", "notC"], [("f", ["A", "B"])], alpha=1)
smooth.observe("C", {"f": "A"})
print("P(f=ABSENT|C) with alpha=1:", smooth.conditional("f", ABSENT, "C"))

# %% [markdown]
# A sliding window forgets old observations; the text dump round-trips.

# %%
w = FrequencyTable(["C", "notC"], [("f", ["A", "B"])], window=3)
for c in ["C", "C", "notC", "notC", "notC"]:
    w.observe(c, {"f": "B"})
print("windowed class counts:", w.class_count("C"), w.class_count("notC"))
print(w.to_text())
assert FrequencyTable.from_text(w.to_text()).same_counts(w)
