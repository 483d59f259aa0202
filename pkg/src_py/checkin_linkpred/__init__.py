from checkin_linkpred.checkins import CheckIn
from checkin_linkpred.checkins import CheckinSchema
from checkin_linkpred.checkins import DatasetStats
from checkin_linkpred.checkins import load_dataset
from checkin_linkpred.checkins import parse_checkin_line
from checkin_linkpred.evaluation import AucReport
from checkin_linkpred.evaluation import ComparisonMode
from checkin_linkpred.evaluation import evaluate_auc
from checkin_linkpred.evaluation import evaluate_grid
from checkin_linkpred.graph import BipartiteGraph
from checkin_linkpred.graph import build_graph
from checkin_linkpred.graph import filter_graph
from checkin_linkpred.predictors import Method
from checkin_linkpred.predictors import PredictorConfig
from checkin_linkpred.predictors import ScoreVector
from checkin_linkpred.predictors import score_user
from checkin_linkpred.sampling import EvalSample
from checkin_linkpred.sampling import sample_random
from checkin_linkpred.sampling import sample_time

__all__ = [
    'AucReport',
    'BipartiteGraph',
    'CheckIn',
    'CheckinSchema',
    'ComparisonMode',
    'DatasetStats',
    'EvalSample',
    'Method',
    'PredictorConfig',
    'ScoreVector',
    'build_graph',
    'evaluate_auc',
    'evaluate_grid',
    'filter_graph',
    'load_dataset',
    'parse_checkin_line',
    'sample_random',
    'sample_time',
    'score_user',
]
