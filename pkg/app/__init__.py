"""Main application package.""" 