"""Entailment scoring over HTTP.

Wraps a cross-encoder NLI model (or an offline stub) behind two routes:
POST /score takes `{"pairs": [{"premise", "hypothesis"}, ...]}` and returns
`{"entailment": [...]}` with one float in [0, 1] per pair, in order;
GET /healthz reports the loaded model and its truncation / label-head
metadata, or 503 while the model is still loading.
"""

__version__ = "0.1.0"
