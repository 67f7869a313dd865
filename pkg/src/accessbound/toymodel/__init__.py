from .model import ForwardTrace, ToyTransformer, log_softmax, softmax
from .probes import PlaneCut, next_token_region, plane_cut_map, radius_profile
from .serialization import load_model, save_model

__all__ = ["ForwardTrace", "ToyTransformer", "softmax", "log_softmax", "PlaneCut",
           "next_token_region", "plane_cut_map", "radius_profile", "save_model", "load_model"]
