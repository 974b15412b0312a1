import sys

from eagle.errors import EagleError
from eagle.log import setup_logger
from eagle.pipeline import end_to_end
from eagle.settings import load_settings


if __name__ == "__main__":
    # Optional INI file as the only argument; generated orders and the fast preset otherwise
    setup_logger(timestamped_file=True)
    config_path = sys.argv[1] if len(sys.argv) > 1 else None
    try:
        result = end_to_end(load_settings(config_path, preset='synthetic'))
    except EagleError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    for report in result.reports.values():
        print(report.summary())
    print("Highest risk: " + ', '.join(result.risk.graph.index.label(i) for i in result.risk.ranking(5)))
