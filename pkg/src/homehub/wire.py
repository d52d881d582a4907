"""Line framing shared by the control protocol and the event log.

One message per line. Payload fields are tab-separated; tab, newline and
backslash inside a field are escaped so a field never breaks the framing.
"""

MAX_LINE = 4096


def escape(value: str) -> str:
    return (
        value.replace("\\", "\\\\")
        .replace("\t", "\\t")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def unescape(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            out.append({"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}.get(nxt, nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def join_fields(fields) -> str:
    return "\t".join(escape(str(f)) for f in fields)


def split_fields(text: str) -> list[str]:
    if text == "":
        return []
    return [unescape(f) for f in text.split("\t")]
