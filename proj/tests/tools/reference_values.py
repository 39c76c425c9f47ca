#!/usr/bin/env python3
"""Independent oracle for the numeric expectations frozen into the C++ tests.

Every value here is evaluated directly from the defining formula, with no
shared code with the C++ implementation.  Run it to regenerate the numbers;
the unit/acceptance tests carry them as literals with 17 significant digits.
"""
import json
import math

import numpy as np

out = {}

# --- article-level retrieval alignment: mean squared distance between a
#     pooled query-side embedding and each retrieved document embedding,
#     normalized by (num_docs * dim).
pooled = np.array([0.5, 0.5])
doc = np.array([1.0, 0.0])
out["article_retrieval_single_doc"] = float(np.sum((pooled - doc) ** 2) / (1 * 2))

# --- article-level generation alignment: squared difference between student
#     and teacher next-token distributions, normalized by (target_len * vocab).
student = np.array([[0.6, 0.4]])
teacher = np.array([[0.5, 0.5]])
out["article_generation_two_token_vocab"] = float(
    np.sum((student - teacher) ** 2) / (student.shape[0] * student.shape[1])
)

# --- chunk-level retrieval alignment: sum over docs j of
#     q_j * ln(q_j / p_j), where q_j / p_j are the j-th entries of the
#     LM-derived and score-derived doc distributions for doc j's assigned chunk.
q_rows = [np.array([0.73, 0.27]), np.array([0.27, 0.73])]
p_rows = [np.array([0.5, 0.5]), np.array([0.5, 0.5])]
acc = 0.0
for j in range(2):
    acc += q_rows[j][j] * math.log(q_rows[j][j] / p_rows[j][j])
out["chunk_retrieval_two_doc_mirror"] = acc

# --- chunk-level generation alignment: KL between a chunk-derived target
#     distribution p' and the doc attention distribution p.
p_prime = np.array([0.7, 0.3])
p_doc = np.array([0.5, 0.5])
out["chunk_generation_kl"] = float(np.sum(p_prime * np.log(p_prime / p_doc)))

# --- perplexity-alignment loss: KL(q || p) with q = softmax of per-doc target
#     log-likelihoods and p = softmax of retrieval scores.
def softmax(v):
    e = np.exp(v - np.max(v))
    return e / e.sum()

q = softmax(np.array([-1.0, -2.0]))
p = softmax(np.array([1.0, 0.0]))
out["perplexity_alignment_shift_invariant"] = float(np.sum(q * np.log(q / p)))

# --- BM25 (Okapi; k1=0.9, b=0.4, idf floored at 1e-6) over a fixed 5-chunk
#     corpus, query "gun lawsuit".  Tokenization: lowercase whitespace split.
chunks = [
    "the gun lawsuit was dismissed by the court",
    "manufacturers are protected from some lawsuits",
    "the court heard a lawsuit about vaccines",
    "apples and oranges are fruit",
    "the state settled the famous court case last year",
]
k1, b = 0.9, 0.4
docs = [c.lower().split() for c in chunks]
ndocs = len(docs)
avgdl = sum(len(d) for d in docs) / ndocs
query = "gun lawsuit".lower().split()
scores = []
for d in docs:
    s = 0.0
    for t in set(query):
        df = sum(1 for dd in docs if t in dd)
        idf = max(1e-6, math.log((ndocs - df + 0.5) / (df + 0.5)))
        tf = d.count(t)
        denom = tf + k1 * (1.0 - b + b * len(d) / avgdl)
        s += idf * (k1 + 1.0) * tf / denom if tf > 0 else 0.0
    scores.append(s)
out["bm25_gun_lawsuit_scores"] = scores

# --- ROUGE-1 F1 for candidate "the cat sat" vs reference "the cat".
cand, ref = "the cat sat".split(), "the cat".split()
overlap = sum(min(cand.count(w), ref.count(w)) for w in set(cand))
prec, rec = overlap / len(cand), overlap / len(ref)
out["rouge1_cat"] = 2 * prec * rec / (prec + rec)

# --- ROUGE-L F1 for "a b c" vs "a x c" (LCS = 2).
def lcs(a, bseq):
    m, n = len(a), len(bseq)
    L = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m):
        for j in range(n):
            L[i + 1][j + 1] = L[i][j] + 1 if a[i] == bseq[j] else max(L[i][j + 1], L[i + 1][j])
    return L[m][n]

a, bseq = "a b c".split(), "a x c".split()
l = lcs(a, bseq)
prec, rec = l / len(a), l / len(bseq)
out["rougeL_abc"] = 2 * prec * rec / (prec + rec)

# --- faithfulness score: mean of (mean over reference sentences of
#     scorer(candidate, sent)) and (mean over candidate sentences of
#     scorer(reference, sent)), with a fixed scorer giving 1.0/0.5 and 0.8.
coverage = (1.0 + 0.5) / 2
consistency = 0.8
out["faithfulness_fixed_scorer"] = (coverage + consistency) / 2

# --- macro-F1 of the always-majority predictor on class counts
#     (388, 532, 67); majority class is the second one.
counts = [388, 532, 67]
total = sum(counts)
f1s = []
for c, n in enumerate(counts):
    tp = n if c == 1 else 0
    fp = (total - n) if c == 1 else 0
    fn = 0 if c == 1 else n
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1s.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
out["majority_macro_f1_percent"] = 100.0 * sum(f1s) / 3

# --- uniform-model sanity values: mean per-token log-likelihood under a
#     uniform 100-token vocabulary, and cross-entropy of a uniform 3-way
#     class distribution.
out["uniform_vocab100_mean_token_loglik"] = -math.log(100.0)
out["uniform_three_way_ce"] = math.log(3.0)

print(json.dumps(out, indent=2))
