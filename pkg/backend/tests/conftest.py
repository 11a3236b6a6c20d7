"""
Pytest configuration and fixtures for statement, scoring, mining and pipeline tests.
"""
import pytest

from app.schemas import MiningConfig, RatioVector
from app.services.statement_service import statement_service

# Feb 2010 column of the sample household balance sheet
TABLE1_FEB_2010_CSV = """# firm_id: household
# period: Feb 2010
name,category,amount,prior_mo,ytd,prior_yr
Cash in Banks,CurrentAsset,"130,490",5.6%,-1.3%,33.2%
Accounts Receivable,CurrentAsset,"12,663",14.3%,86.9%,-61.4%
Total Current Assets,CurrentAsset,"143,153",6.3%,3.0%,9.5%
Investments,LongTermAsset,"40,707",3.8%,8.3%,+20.9%
Retirement,LongTermAsset,"128,891",4.0%,1.3%,
2004 Honda Civic,LongTermAsset,"6,898",0.0%,0.0%,13.1%
Total Long-term Assets,LongTermAsset,"176,496",3.8%,2.8%,-11.3%
Total Assets,LongTermAsset,"319,649",4.9%,2.9%,58.9%
Accounts payable,CurrentLiability,"5,125",21.7%,48.9%,-223.3%
Total Current Liabilities,CurrentLiability,"5,125",21.7%,48.9%,-223.3%
Student Loans,LongTermLiability,0,,,
Total Long-term Liabilities,LongTermLiability,0,,,
TOTAL LIABILITIES,LongTermLiability,"5,125",21.7%,48.9%,-223.3%
OVERALL TOTAL,Equity,"314,525",5.5%,4.6%,57.6%
"""

# Feb 2009 column: the long-term subtotal does not match its rows
TABLE1_FEB_2009_CSV = """# firm_id: household
# period: 2009-02
name,category,amount
Cash in Banks,CurrentAsset,"97,927"
Accounts Receivable,CurrentAsset,"32,778"
Total Current Assets,CurrentAsset,"130,705"
Investments,LongTermAsset,"7,814"
Retirement,LongTermAsset,"54,829"
2004 Honda Civic,LongTermAsset,"7,773"
Total Long-term Assets,LongTermAsset,"171,760"
Total Assets,LongTermAsset,"201,151"
Accounts payable,CurrentLiability,"1,590"
Total Current Liabilities,CurrentLiability,"1,590"
Student Loans,LongTermLiability,0
Total Long-term Liabilities,LongTermLiability,0
TOTAL LIABILITIES,LongTermLiability,"1,590"
OVERALL TOTAL,Equity,"199,561"
"""


def make_statement_csv(firm_id, period, current_assets, long_term_assets, current_liabilities,
                       long_term_liabilities, sales=None, ebit=None, retained_earnings=None,
                       market_value_equity=None):
    """A balanced statement: equity is whatever assets leave after liabilities"""
    equity = current_assets + long_term_assets - current_liabilities - long_term_liabilities
    rows = [
        f"# firm_id: {firm_id}",
        f"# period: {period}",
        "name,category,amount",
        f"Cash,CurrentAsset,{current_assets}",
        f"Plant and Equipment,LongTermAsset,{long_term_assets}",
        f"Accounts Payable,CurrentLiability,{current_liabilities}",
        f"Bank Loan,LongTermLiability,{long_term_liabilities}",
        f"Common Stock,Equity,{equity}",
    ]
    for label, value in (("Sales", sales), ("EBIT", ebit), ("Retained Earnings", retained_earnings),
                         ("Market Value Equity", market_value_equity)):
        if value is not None:
            rows.append(f"{label},Supplemental,{value}")
    return "\n".join(rows) + "\n"


# Ratios (0.1, 0.2, 0.1, 0.5, 1.0): Z = 2.029, Gray zone
GRAY_FIRM_CSV = make_statement_csv(
    "acme", "2010-02", 300, 700, 200, 200,
    sales=1000, ebit=100, retained_earnings=200, market_value_equity=200,
)


@pytest.fixture
def table1_csv():
    return TABLE1_FEB_2010_CSV


@pytest.fixture
def table1_feb_2009_csv():
    return TABLE1_FEB_2009_CSV


@pytest.fixture
def table1_statement():
    return statement_service.parse_statement(TABLE1_FEB_2010_CSV, "csv")


@pytest.fixture
def gray_firm_csv():
    return GRAY_FIRM_CSV


@pytest.fixture
def gray_firm_statement():
    return statement_service.parse_statement(GRAY_FIRM_CSV, "csv")


@pytest.fixture
def gray_ratios():
    return RatioVector(x1=0.1, x2=0.2, x3=0.1, x4=0.5, x5=1.0)


@pytest.fixture
def statement_csv_factory():
    return make_statement_csv


@pytest.fixture
def synthetic_corpus(tmp_path):
    """Ten scorable firms spread over all three zones, written as CSV files"""
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    profiles = [
        # ca, lta, cl, ltl, sales, ebit, re, mve
        (300, 700, 200, 200, 1000, 100, 200, 200),
        (500, 500, 100, 100, 1500, 200, 300, 900),
        (100, 900, 300, 500, 400, -50, -100, 100),
        (450, 550, 150, 150, 1400, 180, 280, 800),
        (120, 880, 280, 520, 350, -40, -120, 90),
        (310, 690, 210, 190, 1050, 110, 190, 210),
        (520, 480, 90, 110, 1600, 210, 320, 950),
        (90, 910, 320, 480, 380, -60, -90, 110),
        (290, 710, 190, 210, 980, 95, 210, 190),
        (480, 520, 110, 90, 1450, 190, 310, 870),
    ]
    for index, (ca, lta, cl, ltl, sales, ebit, re, mve) in enumerate(profiles):
        text = make_statement_csv(f"firm{index:02d}", "2010-02", ca, lta, cl, ltl, sales, ebit, re, mve)
        (corpus / f"firm{index:02d}.csv").write_text(text, encoding="utf-8")
    return corpus


@pytest.fixture
def mining_config():
    return MiningConfig(min_support=2, min_confidence=0.6, bins=3, k_clusters=2, seed=7)
