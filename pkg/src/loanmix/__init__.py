"""Mixed student-loan portfolio equilibria."""
