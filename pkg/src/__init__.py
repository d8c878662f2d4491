"""RefSR-Adv 源代码包"""
