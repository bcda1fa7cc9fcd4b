"""Exploration agents: random, tabular Q-Learning, DDPG, TD3 and SAC."""

# Do not import here to avoid circular imports
# Import directly from submodules when needed:
# from fatesim.agents.factory import build_agent
# from fatesim.agents.tabular import QTable, q_update
