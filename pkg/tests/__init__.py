# Tests for trade-design
