"""
--------------------------------------------------------------------------------
SYSTEM ROLE:
Results Dashboard (CLI).
Reads the results ledger and prints, per published table and channel, the
latest computed value next to its published target.

USAGE:
python results_dashboard.py
python results_dashboard.py --db results/nmk_results.db
--------------------------------------------------------------------------------
"""

import argparse
import math

import pandas as pd
from colorama import Fore, Style, init
from tabulate import tabulate

from results_ledger import ResultsLedger, default_db_path

init(autoreset=True)

STATUS_COLORS = {"PASS": Fore.GREEN, "FLAG": Fore.YELLOW, "FAIL": Fore.RED, "N/A": Fore.WHITE}


def classify(value: float, target, tolerance, flag) -> str:
    """PASS / FAIL against a relative tolerance; a flagged row is FLAG whatever its value."""
    if isinstance(flag, str) and flag:
        return "FLAG"
    if target is None or tolerance is None or pd.isna(target) or pd.isna(tolerance):
        return "N/A"
    deviation = abs(value - target) / abs(target)
    return "PASS" if deviation <= tolerance else "FAIL"


def build_report(df: pd.DataFrame) -> pd.DataFrame:
    """Latest row per (label, channel) with deviation and status columns."""
    if df.empty:
        return df
    df = df.copy()
    df["value"] = pd.to_numeric(df["value"], errors="coerce").fillna(0.0)
    df["target"] = pd.to_numeric(df["target"], errors="coerce")
    df["tolerance"] = pd.to_numeric(df["tolerance"], errors="coerce")
    latest = df.sort_values("id").groupby(["label", "channel"], as_index=False).tail(1)
    latest = latest.sort_values(["label", "channel"]).reset_index(drop=True)
    latest["deviation"] = [
        abs(v - t) / abs(t) if not pd.isna(t) and t != 0 else math.nan
        for v, t in zip(latest["value"], latest["target"])
    ]
    latest["status"] = [classify(v, t, tol, f) for v, t, tol, f in
                        zip(latest["value"], latest["target"], latest["tolerance"], latest["flag"])]
    return latest


def print_report(report: pd.DataFrame):
    print(f"\n{Style.BRIGHT}{Fore.CYAN}📊 NON-MARKOVIANITY RESULTS")
    print("=" * 78)
    if report.empty:
        print(f"{Fore.RED}❌ Ledger is empty. Run `python nmk.py table 1` first.")
        return

    rows = []
    for _, row in report.iterrows():
        status = row["status"]
        target = "" if pd.isna(row["target"]) else f"{row['target']:.4g}"
        deviation = "" if pd.isna(row["deviation"]) else f"{100 * row['deviation']:.1f}%"
        rows.append([row["label"], f"{row['channel']}/{row['env']}", row["measure"], row["n_qubits"],
                     f"{row['value']:.6g}", target, deviation,
                     f"{STATUS_COLORS[status]}{status}{Style.RESET_ALL}"])
    print(tabulate(rows, headers=["TABLE", "CHANNEL", "MEASURE", "N", "VALUE", "TARGET", "DEV", "STATUS"],
                   tablefmt="simple"))
    print("=" * 78)

    counts = report["status"].value_counts()
    print(f"{Style.BRIGHT}🏆 {counts.get('PASS', 0)} pass | {counts.get('FLAG', 0)} flagged | "
          f"{counts.get('FAIL', 0)} fail")
    for _, row in report[report["status"] == "FLAG"].iterrows():
        print(f"{Fore.YELLOW}⚠️  {row['label']} {row['channel']}: {row['flag']}")
    print("=" * 78 + "\n")


def main():
    parser = argparse.ArgumentParser(description="Terminal report over the results ledger")
    parser.add_argument("--db", default=None, help=f"ledger path (default {default_db_path()})")
    args = parser.parse_args()
    ledger = ResultsLedger(args.db)
    print_report(build_report(ledger.frame()))


if __name__ == "__main__":
    try:
        main()
    except Exception as e:
        print(f"❌ Error: {e}")
