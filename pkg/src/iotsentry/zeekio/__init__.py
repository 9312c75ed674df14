from .parser import (
    NoticeSchema,
    ParseQuarantine,
    ZeekNotice,
    STANDARD_NOTICE_FIELDS,
    compose_header,
    compose_notice_line,
    parse_header,
    parse_notice_line,
)
from .tailer import Cursor, NoticeTailer, TailerStats

__all__ = [
    "NoticeSchema",
    "ParseQuarantine",
    "ZeekNotice",
    "STANDARD_NOTICE_FIELDS",
    "compose_header",
    "compose_notice_line",
    "parse_header",
    "parse_notice_line",
    "Cursor",
    "NoticeTailer",
    "TailerStats",
]
