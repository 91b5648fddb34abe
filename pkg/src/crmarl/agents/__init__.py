from .base import DEFAULT_TEMPERATURES, ActContext, Agent, AgentConfig, default_configs, default_temperatures
from .features import candidate_set, feature_matrix
from .gateway import ChatGateway, complete
from .remote import RemoteAdversary, RemoteAgent, RemoteCritic
from .scripted import ConstantAgent, OracleAgent, RuleAgent, TableAgent
from .toy import ToyAgent, ToyPolicyParams, toy_distribution

__all__ = [
    "DEFAULT_TEMPERATURES", "ActContext", "Agent", "AgentConfig", "ChatGateway", "ConstantAgent",
    "OracleAgent", "RemoteAdversary", "RemoteAgent", "RemoteCritic", "RuleAgent", "TableAgent",
    "ToyAgent", "ToyPolicyParams", "candidate_set", "complete", "default_configs",
    "default_temperatures", "feature_matrix", "toy_distribution",
]
