"""通用工具：日志、异常层级与可复现随机数流"""
