"""CLI package initialization.""" 