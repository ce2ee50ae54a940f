"""Core package initialization.""" 