#!/usr/bin/env python3
"""Convert raw event log exports into the canonical CSV layout.

The package expects ``case_id,activity,timestamp`` columns with ISO
timestamps (``%Y-%m-%dT%H:%M:%S``).  This script maps arbitrary column
names and timestamp formats onto that layout and can merge several input
files into one log (rows keep their file order; the parser sorts).

Examples:

    python3 scripts/prepare_data.py --preset bpic2014 \
        --in Detail_Incident_Activity.csv --out data/bpic2014.csv

    python3 scripts/prepare_data.py --preset helpdesk \
        --in finale.csv --out data/helpdesk.csv

    python3 scripts/prepare_data.py \
        --in wbs72.csv wbs223.csv --out data/wbs72_223.csv \
        --case-col case --activity-col event --timestamp-col completeTime \
        --ts-format "%Y/%m/%d %H:%M:%S.%f"
"""

import argparse
import csv
import sys
from datetime import datetime
from pathlib import Path

PRESETS = {
    "bpic2014": {
        "case_col": "Incident ID",
        "activity_col": "IncidentActivity_Type",
        "timestamp_col": "DateStamp",
        "ts_format": "%d-%m-%Y %H:%M:%S",
        "delimiter": ";",
    },
    "helpdesk": {
        "case_col": "Case ID",
        "activity_col": "Activity",
        "timestamp_col": "Complete Timestamp",
        "ts_format": "%Y-%m-%d %H:%M:%S",
        "delimiter": ",",
    },
}


def build_parser():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="raw CSV file(s); several are merged into one log")
    parser.add_argument("--out", required=True, help="canonical CSV to write")
    parser.add_argument("--preset", choices=sorted(PRESETS),
                        help="fill column names and formats for a known export")
    parser.add_argument("--case-col")
    parser.add_argument("--activity-col")
    parser.add_argument("--timestamp-col")
    parser.add_argument("--ts-format", help="strptime pattern of the raw timestamps")
    parser.add_argument("--delimiter")
    parser.add_argument("--encoding", default="utf-8-sig")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    settings = dict(PRESETS.get(args.preset, {}))
    for key in ("case_col", "activity_col", "timestamp_col", "ts_format", "delimiter"):
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    missing = [k for k in ("case_col", "activity_col", "timestamp_col", "ts_format") if k not in settings]
    if missing:
        print(f"error: no preset and no value for {', '.join(missing)}", file=sys.stderr)
        return 1
    settings.setdefault("delimiter", ",")

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    rows = 0
    skipped = 0
    with open(out_path, "w", newline="", encoding="utf-8") as out_file:
        writer = csv.writer(out_file)
        writer.writerow(["case_id", "activity", "timestamp"])
        for source in args.inputs:
            with open(source, newline="", encoding=args.encoding) as in_file:
                reader = csv.DictReader(in_file, delimiter=settings["delimiter"])
                for row in reader:
                    case = (row.get(settings["case_col"]) or "").strip()
                    activity = (row.get(settings["activity_col"]) or "").strip()
                    raw_ts = (row.get(settings["timestamp_col"]) or "").strip()
                    if not case or not activity or not raw_ts:
                        skipped += 1
                        continue
                    try:
                        ts = datetime.strptime(raw_ts, settings["ts_format"])
                    except ValueError:
                        skipped += 1
                        continue
                    writer.writerow([case, activity, ts.strftime("%Y-%m-%dT%H:%M:%S")])
                    rows += 1
    print(f"wrote {rows} events to {out_path}" + (f" ({skipped} rows skipped)" if skipped else ""))
    return 0 if rows else 1


if __name__ == "__main__":
    sys.exit(main())
