"""Python bindings for the fashionrec core library."""

from ._fashionrec import (
    Assistant,
    Catalog,
    FashionrecError,
    build_dataset,
    cis,
    cosine,
    cts,
    evaluate_run,
    filter_user_history,
    find_alternative_pairs,
    history_score,
    make_fixture,
    mmr_loss,
    mock_embed,
    personalization,
    run_cli,
    sbert_similarity,
    t2i_loss,
)

__all__ = [
    "Assistant",
    "Catalog",
    "FashionrecError",
    "build_dataset",
    "cis",
    "cosine",
    "cts",
    "evaluate_run",
    "filter_user_history",
    "find_alternative_pairs",
    "history_score",
    "make_fixture",
    "mmr_loss",
    "mock_embed",
    "personalization",
    "run_cli",
    "sbert_similarity",
    "t2i_loss",
]
