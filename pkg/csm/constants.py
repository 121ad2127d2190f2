"""
    Contrast mining constants
"""
# Event code shape
CODE_LENGTH = 5
CODE_PAD = "."
DRUG_PREFIX = "rx:"

GENDER_MALE = 1
GENDER_FEMALE = 2
GENDERS = (GENDER_MALE, GENDER_FEMALE)

# Preprocessing
FIRST_YEAR_DAYS = 365

# Study definition defaults
OUTCOME_WINDOW_DAYS = 30
CONTROLS_PER_CASE = 5
AGE_BAND_YEARS = 5

# Miner defaults
MIN_SUPPORT = "0.05"
MAX_ITEMSET_SIZE = 3
# Item universes up to this size are packed into per-transaction bitsets
BITSET_MAX_ITEMS = 4096
ITEMSET_SEPARATOR = "&"

# IRLS
IRLS_MAX_ITERATIONS = 50
IRLS_TOLERANCE = 1e-8
IRLS_MAX_HALVINGS = 30
IRLS_RIDGE = 1e-10
SEPARATION_LIMIT = 15.0

# Design matrix column names, in order
COLUMN_INTERCEPT = "intercept"
COLUMN_AGE = "age"
COLUMN_GENDER = "gender"
COLUMN_X = "x"
COLUMN_EXPOSURE = "exposure"
COLUMN_INTERACTION = "interaction"
DESIGN_COLUMNS = (COLUMN_INTERCEPT, COLUMN_AGE, COLUMN_GENDER, COLUMN_X,
                  COLUMN_EXPOSURE, COLUMN_INTERACTION)

FLAG_SEPARATION = "separation"
FLAG_COLLINEAR = "collinear"
FLAG_SEPARATOR = "|"

# File layouts
PATIENTS_COLUMNS = ("patient_id", "gender", "birth_date", "registration_date")
ENTRY_COLUMNS = ("patient_id", "code", "date")
DICTIONARY_COLUMNS = ("code", "description")
CANDIDATE_COLUMNS = ("itemset", "supp_d2", "supp_d1", "supp_ratio")
REPORT_COLUMNS = ("itemset", "supp_d2", "supp_d1", "supp_ratio", "p_age", "p_gender",
                  "p_exposure", "p_x", "p_interaction", "flags", "rank")
DESCRIPTION_COLUMN = "description"

PATIENTS_FILE = "patients.csv"
EVENTS_FILE = "events.csv"
PRESCRIPTIONS_FILE = "prescriptions.csv"

SUPPORT_FORMAT = "{:#.6g}"
P_VALUE_FORMAT = "{:.2e}"

# CLI exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_EMPTY_STUDY = 3
EXIT_MATCHING = 4
EXIT_IO = 5
EXIT_DATA = 6
