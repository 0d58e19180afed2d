#include "fixtures.hpp"

#include <json.hpp>

#include <fstream>
#include <random>
#include <sstream>

namespace fixtures {
namespace {

const std::vector<std::string> kArticleTitles{
    "DEFINITIONS",      "SCOPE OF SERVICES", "FEES AND PAYMENT",     "TERM AND TERMINATION", "CONFIDENTIALITY",
    "WARRANTIES",       "INDEMNIFICATION",   "LIMITATION OF LIABILITY", "INTELLECTUAL PROPERTY", "GOVERNING LAW",
    "FORCE MAJEURE",    "NOTICES",           "ASSIGNMENT",           "MISCELLANEOUS",
};

const std::vector<std::string> kSentences{
    "The Supplier shall perform the Services in a professional and workmanlike manner.",
    "The Customer shall pay all undisputed invoices within thirty days of receipt.",
    "Either party may terminate this Agreement upon written notice if the other party commits a material breach.",
    "Each party shall keep the Confidential Information of the other party in strict confidence.",
    "Nothing in this Agreement shall be construed as creating a partnership or joint venture.",
    "The Supplier warrants that the Deliverables will conform to the Specifications for ninety days.",
    "Neither party shall be liable for any indirect or consequential loss.",
    "All notices shall be in writing and delivered by hand or by registered mail.",
    "This Agreement shall be governed by the laws of the State of New York.",
    "The Customer may not assign this Agreement without the prior written consent of the Supplier.",
    "Any amendment to this Agreement must be signed by authorized representatives of both parties.",
    "The obligations in this section survive termination or expiry of this Agreement.",
    "The Supplier shall maintain adequate insurance with reputable insurers.",
    "Fees are exclusive of value added tax, which shall be payable in addition.",
    "The Customer shall provide the Supplier with reasonable access to its premises.",
    "Intellectual property created by the Supplier in performing the Services vests in the Customer.",
};

const std::vector<std::string> kProse{
    "the committee met on several occasions during the spring to review the proposals submitted by members",
    "after lengthy discussion it was agreed that further consultation would be required before any decision",
    "many of the respondents expressed concern about the timetable and the resources available to them",
    "a number of practical issues were raised in relation to storage, transport and the handling of records",
    "it was noted that the previous arrangements had worked reasonably well for most of the participants",
    "several people asked whether the new approach would affect existing commitments and ongoing projects",
    "the chair thanked everyone for their contributions and promised to circulate a summary in due course",
    "there was broad support for continuing the informal meetings on a monthly basis through the autumn",
};

struct Planted {
    std::string clause;
    std::string query;
};

const std::vector<Planted> kPlanted{
    {"The Supplier shall recalibrate the cryogenic storage vessels every quarter using an accredited metrology laboratory.",
     "How often must the cryogenic storage vessels be recalibrated by a metrology laboratory?"},
    {"Falconry demonstrations at the venue require a licensed raptor handler and a separate wildlife permit.",
     "Who must handle raptors during falconry demonstrations and is a wildlife permit needed?"},
    {"Royalties on audiobook narration recordings are payable semiannually in Icelandic kronur.",
     "In which currency and how frequently are audiobook narration royalties paid?"},
    {"The tenant may install rooftop photovoltaic panels provided that the structural engineer approves the ballast design.",
     "May the tenant install rooftop photovoltaic panels and what ballast approval is required?"},
    {"Any dispute concerning vineyard irrigation quotas shall be referred to the regional viticulture ombudsman.",
     "Where are disputes about vineyard irrigation quotas referred?"},
    {"The licensee must purge telemetry logs from submarine sonar buoys within seventy two hours of retrieval.",
     "How quickly must telemetry logs from sonar buoys be purged after retrieval?"},
    {"Catering staff shall label every dish containing sesame, lupin or mustard allergens in braille as well as print.",
     "Must catering staff label sesame, lupin and mustard allergens in braille?"},
    {"Helicopter charter cancellations within forty eight hours incur a surcharge equal to the fuel reservation deposit.",
     "What surcharge applies to late helicopter charter cancellations?"},
    {"The archivist shall digitize fragile parchment manuscripts only under humidity controlled conservation lighting.",
     "Under what lighting and humidity conditions may parchment manuscripts be digitized?"},
    {"Racehorse stabling fees escalate by the published equine feed index each January.",
     "How do racehorse stabling fees escalate each January?"},
};

}  // namespace

std::string synthetic_contract(unsigned seed) {
    std::mt19937 rng(seed);
    auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
    auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    std::ostringstream os;
    static const char* kTitles[] = {"MASTER SERVICES AGREEMENT", "SUPPLY AGREEMENT", "CONSULTING AGREEMENT",
                                    "LICENSE AGREEMENT"};
    os << kTitles[seed % 4] << "\n\n";
    os << "This Agreement is made between Alpha Holdings Ltd and Beta Services Inc (number " << seed
       << "). " << pick(kSentences) << "\n\n";
    const int articles = uniform(3, 8);
    for (int a = 1; a <= articles; ++a) {
        os << a << ". " << kArticleTitles[(seed + static_cast<unsigned>(a)) % kArticleTitles.size()] << "\n";
        if (uniform(0, 2) == 0) os << pick(kSentences) << "\n";
        const int clauses = uniform(1, 4);
        for (int c = 1; c <= clauses; ++c) {
            os << a << "." << c << " " << pick(kSentences);
            if (uniform(0, 1)) os << " " << pick(kSentences);
            os << "\n";
            const int items = uniform(0, 3);
            for (int i = 0; i < items; ++i) os << "(" << static_cast<char>('a' + i) << ") " << pick(kSentences) << "\n";
        }
        os << "\n";
    }
    return os.str();
}

std::string unstructured_text(unsigned seed, std::size_t approx_chars) {
    std::mt19937 rng(seed);
    std::string out;
    std::size_t in_para = 0;
    while (out.size() < approx_chars) {
        std::string s = kProse[rng() % kProse.size()];
        s[0] = static_cast<char>(s[0] - 'a' + 'A');
        out += s + ". ";
        if (++in_para >= 4 + rng() % 4) {
            out.back() = '\n';
            out += "\n";
            in_para = 0;
        }
    }
    return out;
}

PlantedCorpus planted_corpus() {
    PlantedCorpus pc;
    for (std::size_t i = 0; i < kPlanted.size(); ++i) {
        std::string doc = synthetic_contract(static_cast<unsigned>(100 + i));
        doc += "99. SPECIAL PROVISIONS\n99.1 ";
        const std::size_t start = doc.size();
        doc += kPlanted[i].clause;
        const std::size_t end = doc.size();
        doc += "\n99.2 " + std::string("The parties acknowledge that this schedule forms part of the Agreement.") + "\n";
        const std::string id = "contract_" + std::to_string(i) + ".txt";
        pc.documents[id] = doc;
        pc.cases.push_back({"case_" + std::to_string(i), kPlanted[i].query, id, {{start, end}}});
    }
    return pc;
}

void write_corpus(const PlantedCorpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "documents");
    for (const auto& [id, body] : corpus.documents) std::ofstream(dir / "documents" / id, std::ios::binary) << body;
    std::ofstream cases(dir / "cases.jsonl");
    for (const auto& c : corpus.cases) {
        nlohmann::json j{{"case_id", c.case_id}, {"query", c.query}, {"document_id", c.document_id}};
        j["spans"] = nlohmann::json::array();
        for (const auto& s : c.ground_truth) j["spans"].push_back({s.start, s.end});
        cases << j.dump() << "\n";
    }
}

std::string report_markdown() {
    return "## Title: Termination rights under the services agreement\n\n"
           "### Summary:\n"
           "The customer may terminate for material breach on written notice [1].\n\n"
           "### Legal Reasoning & Analysis:\n"
           "Clause 2.1 grants a termination right for material breach [1]. Survival is addressed separately [2].\n\n"
           "### Preliminary Answer & Direction for Further Research:\n"
           "Termination is available after a material breach, subject to notice [1].\n\n"
           "### Gaps & Next Questions:\n"
           "- Is there a cure period before termination takes effect?\n"
           "- Do any obligations survive termination?\n\n"
           "### Sources:\n"
           "1. \"Either party may terminate this Agreement upon written notice if the other party commits a material "
           "breach.\" - Clause 2.1 (file: msa.txt)\n"
           "2. \"The obligations in this section survive termination or expiry of this Agreement.\" - Clause 5.3 "
           "(file: msa.txt)\n";
}

std::string nli_report_markdown() {
    return "## Title: Disclosure of confidential information to affiliates\n\n"
           "### Summary:\n"
           "The hypothesis concerns sharing confidential information with affiliates [1].\n\n"
           "### Legal Reasoning & Analysis:\n"
           "One could read the clause as NEUTRAL, but the permitted-recipient list names affiliates [1].\n\n"
           "### Preliminary Answer & Direction for Further Research:\n"
           "The relationship between the contract and the hypothesis appears to be **ENTAILMENT** with specific "
           "conditions on need-to-know access [1].\n\n"
           "### Gaps & Next Questions:\n"
           "- Whether affiliates must sign separate undertakings.\n\n"
           "### Sources:\n"
           "1. \"The Recipient may disclose Confidential Information to its Affiliates on a need-to-know basis.\" - "
           "Section 4.2\n";
}

std::filesystem::path temp_dir(const std::string& name) {
    static std::mt19937_64 rng{std::random_device{}()};
    const auto dir = std::filesystem::temp_directory_path() / ("clausekit-" + name + "-" + std::to_string(rng() % 1000000007ULL));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fixtures
