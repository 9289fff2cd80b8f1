"""Decoder symbol alphabet: ten digits, the list separator, and markers."""

N_DIGITS = 10  # symbol ids 0-9 are the digits themselves
COMMA = 10
EOS = 11
BOS = 12  # input-only: previous-symbol slot at the first decode step
N_SYMBOLS = 13


def encode_target(target: str) -> list[int]:
    """Symbol ids for a docid or comma-joined docid list, EOS appended."""
    out = []
    for ch in target:
        if ch == ",":
            out.append(COMMA)
        elif "0" <= ch <= "9":
            out.append(ord(ch) - ord("0"))
        else:
            raise ValueError(f"invalid target character {ch!r}")
    out.append(EOS)
    return out


def decode_symbols(symbols) -> str:
    """Inverse of encode_target for digit/comma symbols (EOS/BOS dropped)."""
    chars = []
    for s in symbols:
        if s < N_DIGITS:
            chars.append(chr(ord("0") + s))
        elif s == COMMA:
            chars.append(",")
    return "".join(chars)
