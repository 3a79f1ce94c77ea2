"""molpo: preference-optimization toolkit for tiny language/molecule translators.

Subpackages are plain modules; import what you need:

* ``molpo.numerics``  — float64 tensors + reverse-mode autodiff + Adam
* ``molpo.policy``    — char-level transformer policy and decoding
* ``molpo.losses``    — SFT / DPO / CPO / KTO objectives and diagnostics
* ``molpo.merge``     — checkpoint format, task vectors, TIES / SLERP / LERP
* ``molpo.chem``      — SMILES tokenizer, parser, valence checks, fingerprints
* ``molpo.textmetrics`` — chrF, Levenshtein, BLEU, ROUGE, length deltas
* ``molpo.nli``       — external entailment scorer transports + local baseline
* ``molpo.evaluation``— per-pair records, win criteria, aggregate reports
* ``molpo.figures``   — PNG rendering of report histograms and comparisons
* ``molpo.data``      — toy corpus, preference triples, JSONL formats
* ``molpo.training``  — batched optimization loops over the losses
* ``molpo.cli``       — the ``molpo`` command-line interface
"""

__version__ = "0.1.0"
