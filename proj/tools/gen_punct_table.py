#!/usr/bin/env python3
"""Emit src/unicode_punct.inc: code point ranges of the Unicode P* general categories."""
import sys
import unicodedata

ranges = []
start = None
for cp in range(0x110000):
    is_p = unicodedata.category(chr(cp)).startswith("P")
    if is_p and start is None:
        start = cp
    elif not is_p and start is not None:
        ranges.append((start, cp - 1))
        start = None
if start is not None:
    ranges.append((start, 0x10FFFF))

out = sys.stdout
out.write("// Generated by tools/gen_punct_table.py (Unicode %s). Do not edit.\n" % unicodedata.unidata_version)
for lo, hi in ranges:
    out.write("    {0x%04X, 0x%04X},\n" % (lo, hi))
