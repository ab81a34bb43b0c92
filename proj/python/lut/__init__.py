"""Listen-understand-translate speech translation toolkit."""

from ._lut import (
    ConfigError,
    EmptyInputError,
    HashMismatchError,
    InfeasibleAlignmentError,
    LutError,
    RunConfig,
    Translator,
    bleu,
    collapse,
    ctc_brute_force,
    ctc_greedy_decode,
    ctc_loss,
    decode,
    evaluate,
    export_attention,
    gen_data,
    pearson,
    probe,
    sweep,
    train,
    train_teacher,
    wer,
)

__all__ = [
    "ConfigError",
    "EmptyInputError",
    "HashMismatchError",
    "InfeasibleAlignmentError",
    "LutError",
    "RunConfig",
    "Translator",
    "bleu",
    "collapse",
    "ctc_brute_force",
    "ctc_greedy_decode",
    "ctc_loss",
    "decode",
    "evaluate",
    "export_attention",
    "gen_data",
    "pearson",
    "probe",
    "sweep",
    "train",
    "train_teacher",
    "wer",
]
