"""Exact regime thresholds for odd powers and the effective-dimension view.

Prints, for p = 3, 5, 7 and d = 3, the DPD and singularity thresholds in rho,
their overlap, and the rationals with denominator up to 40 inside it.  Then
reproduces the Phi^4 example as a single report.

    python3 demos/regime_table.py
"""

from sqtorus.regimes import overlap_interval, regime_report, scan_rationals

print(f"{'p':>2} {'d':>2}  {'overlap in rho':>22}  {'in delta = 2 - rho':>22}  hits")
for p in (3, 5, 7):
    lo, hi = overlap_interval(p, 3)
    hits = scan_rationals(p, 3)
    print(f"{p:>2} {3:>2}  ({str(lo):>9}, {str(hi):>9}]  [{str(2 - hi):>9}, {str(2 - lo):>9})  {len(hits)}")

print()
rep = regime_report(3, 3, rho="-3/5")
print(rep.table())
print("note:", rep.note)
