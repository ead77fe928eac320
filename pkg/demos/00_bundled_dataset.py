"""Regenerate the bundled interaction log shipped under data/synth200/.

The log is synthetic implicit feedback: 200 users, 120 items, dense enough
that 20-core filtering keeps everyone. Rerunning this script reproduces
the file byte for byte (fixed seed).
"""

from pathlib import Path

from persize.synthetic import generate_interactions, write_interactions

out = Path(__file__).resolve().parent.parent / "data" / "synth200" / "interactions.tsv"
rows = generate_interactions()
write_interactions(rows, out)
print(f"wrote {len(rows)} interactions to {out}")
