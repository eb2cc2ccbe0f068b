"""Code-line labels attached to rep events.

Primitive reps carry an RDCSS label, exportable reps (the RDCSS calls made
by MCAS) carry an MCAS label.
"""

# RDCSS: rdcss / rdcss_loop / complete
ALLOC_RDESC = "L-rdcss-alloc-desc"
LOOP_CAS = "L-rdcss-cas"
COMPLETE_READ_DESC = "L-complete-read-desc"
COMPLETE_READ_PT1 = "L-complete-read-pt1"
COMPLETE_SUCCESS = "L-complete-success"
COMPLETE_UNDO = "L-complete-undo"

# RDCSS: data-pointer accessors
RREAD = "L-rread-access"
RCAS = "L-rcas-access"
RWRITE_READ = "L-rwrite-access"
RWRITE_CAS = "L-rwrite-attempt"

# RDCSS: control-pointer accessors and allocation
RREAD_C = "L-rread-c"
RCAS_C = "L-rcas-c"
RWRITE_C = "L-rwrite-c"
RALLOC_C = "L-ralloc-c"
RALLOC_D = "L-ralloc-d"

RDCSS_LINES = frozenset({
    ALLOC_RDESC, LOOP_CAS, COMPLETE_READ_DESC, COMPLETE_READ_PT1,
    COMPLETE_SUCCESS, COMPLETE_UNDO, RREAD, RCAS, RWRITE_READ, RWRITE_CAS,
    RREAD_C, RCAS_C, RWRITE_C, RALLOC_C, RALLOC_D,
})

# MCAS
MALLOC = "L-malloc"
ALLOC_STATUS = "L-mcas-alloc-status"
ALLOC_MDESC = "L-mcas-alloc-desc"
HELP_READ_DESC = "L-help-read-desc"
HELP_PHASE1 = "L-help-phase1"
HELP_RESOLVE = "L-help-resolve"
HELP_PHASE2 = "L-help-phase2"
HELP_REMOVE = "L-help-remove"
INVOKE_RDCSS = "L-invoke-rdcss"
MREAD = "L-mread-access"
MWRITE_READ = "L-mwrite-access"
MWRITE_CAS = "L-mwrite-attempt"
# opportunistic mread only
MREAD_DESC = "L-mread-desc"
MREAD_STATUS = "L-mread-status"

MCAS_LINES = frozenset({
    MALLOC, ALLOC_STATUS, ALLOC_MDESC, HELP_READ_DESC, HELP_PHASE1,
    HELP_RESOLVE, HELP_PHASE2, HELP_REMOVE, INVOKE_RDCSS, MREAD,
    MWRITE_READ, MWRITE_CAS, MREAD_DESC, MREAD_STATUS,
})

ALL_LINES = RDCSS_LINES | MCAS_LINES
