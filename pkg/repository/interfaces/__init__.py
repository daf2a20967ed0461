# Repository interfaces module
