# Repository pattern implementation for run artifacts
