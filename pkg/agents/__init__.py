# Agents package for locopt: iterative heuristic solvers
