"""
NESS-DMRG core components: tensors, matrix product algebra, superspace
construction, the DMRG solver and the dense oracle.
"""
