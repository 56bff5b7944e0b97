from .csv_emitter import emit as emit_csv
from .decomposition_emitter import emit as emit_decomposition
from .field_emitter import emit as emit_field
from .field_emitter import load as load_field
from .jsonl_emitter import emit as emit_jsonl

__all__ = [
    "emit_csv",
    "emit_decomposition",
    "emit_field",
    "emit_jsonl",
    "load_field",
]
