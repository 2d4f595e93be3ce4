"""Python access to the iclpara C++ core."""

from ._core import (
    AuthError,
    BackendError,
    Error,
    GenerationFailure,
    InputError,
    RunAborted,
    __version__,
    bert_f1,
    catalog_lookup,
    cider,
    config_digest,
    corpus_bleu,
    instruction_catalog,
    lexicon_toxicity,
    load_corpus,
    mann_whitney,
    render_prompt,
    report,
    rouge_l,
    run_experiment,
    run_sweep,
    sentence_bleu,
    split_counts,
    strategy_labels,
    subsample_size,
    tokenize,
)

__all__ = [
    "AuthError",
    "BackendError",
    "Error",
    "GenerationFailure",
    "InputError",
    "RunAborted",
    "__version__",
    "bert_f1",
    "catalog_lookup",
    "cider",
    "config_digest",
    "corpus_bleu",
    "instruction_catalog",
    "lexicon_toxicity",
    "load_corpus",
    "mann_whitney",
    "render_prompt",
    "report",
    "rouge_l",
    "run_experiment",
    "run_sweep",
    "sentence_bleu",
    "split_counts",
    "strategy_labels",
    "subsample_size",
    "tokenize",
]
