from eagle.explain.risk import RiskGraph, Attribution, ExportFormat, aggregate_risk, export_risk, load_risk, \
    normalize_risk
