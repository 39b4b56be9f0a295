from .compile import CompiledRule, ConstSlot, OutputSpec, compose_rule
from .expr import ExprError, parse_expr
from .ops import (EMAIL_PATTERN, PHONE_PATTERN, BoolV, IntV, MapV, StrV, build_arith, build_bool,
                  build_cmp, build_contain, build_default, build_endwith, build_exists,
                  build_extract_email, build_extract_phone, build_lookup, build_replace,
                  build_split, build_startwith, build_str_eq, build_tolower, build_truncate)
from .schema import ConstSpec, FieldSchema, SchemaError, TriggerSchema

__all__ = [
    "CompiledRule", "ConstSlot", "OutputSpec", "compose_rule", "ExprError", "parse_expr",
    "BoolV", "IntV", "MapV", "StrV", "PHONE_PATTERN", "EMAIL_PATTERN",
    "build_arith", "build_bool", "build_cmp", "build_contain", "build_default", "build_endwith",
    "build_exists", "build_extract_email", "build_extract_phone", "build_lookup",
    "build_replace", "build_split", "build_startwith", "build_str_eq", "build_tolower",
    "build_truncate", "ConstSpec", "FieldSchema", "SchemaError", "TriggerSchema",
]
