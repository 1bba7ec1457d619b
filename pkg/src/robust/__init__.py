from src.robust.ood import Breach, OodReport, OodStats, assess_rows, fit_ood_stats, ood_score, range_breach
