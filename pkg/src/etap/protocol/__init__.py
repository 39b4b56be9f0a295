from .messages import (TAG_ACTION, TAG_BUNDLE, TAG_TRIGGER, ActionMsg, GarbledBundle, TriggerMsg,
                       WireError, decode_message, encode_message, frame)
from .parties import (DEFAULT_TAU, ActionService, AsResult, Fired, NotFired, OutOfCircuits, Reject,
                      RuleKeys, StaleTapError, StoreFull, TriggerActionPlatform, TriggerService,
                      TriggerStore, TrustedClient, as_exec, ckt_garbling, encoding_for, setup_rule,
                      tap_exec, ts_exec, ts_exec_fake)

__all__ = [
    "TAG_ACTION", "TAG_BUNDLE", "TAG_TRIGGER", "ActionMsg", "GarbledBundle", "TriggerMsg",
    "WireError", "decode_message", "encode_message", "frame", "DEFAULT_TAU", "ActionService",
    "AsResult", "Fired", "NotFired", "OutOfCircuits", "Reject", "RuleKeys", "StaleTapError",
    "StoreFull", "TriggerActionPlatform", "TriggerService", "TriggerStore", "TrustedClient",
    "as_exec", "ckt_garbling", "encoding_for", "setup_rule", "tap_exec", "ts_exec", "ts_exec_fake",
]
