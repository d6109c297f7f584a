#include "mdpx/format.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace mdpx {

namespace {

bool isIdentStart(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool isIdentChar(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool validIdent(const std::string& t) {
    if (t.empty() || !isIdentStart(t[0])) return false;
    for (char c : t)
        if (!isIdentChar(c)) return false;
    return true;
}

bool validInt(const std::string& t) {
    size_t i = (t.size() > 1 && (t[0] == '-' || t[0] == '+')) ? 1 : 0;
    if (i >= t.size()) return false;
    for (; i < t.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(t[i]))) return false;
    return true;
}

struct Token {
    std::string text;
    int column;  // 1-based
};

std::vector<Token> tokenize(const std::string& line) {
    std::vector<Token> out;
    size_t i = 0;
    while (i < line.size()) {
        if (std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
            continue;
        }
        if (line[i] == '#') break;
        size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) && line[j] != '#') ++j;
        out.push_back({line.substr(i, j - i), static_cast<int>(i) + 1});
        i = j;
    }
    return out;
}

Rat parseProb(const Token& tok, int line) {
    const std::string& t = tok.text;
    auto slash = t.find('/');
    std::string numPart = slash == std::string::npos ? t : t.substr(0, slash);
    std::string denPart = slash == std::string::npos ? "1" : t.substr(slash + 1);
    if (!validInt(numPart) || !validInt(denPart) || denPart[0] == '-' || denPart[0] == '+')
        throw ParseError({line, tok.column}, "malformed probability '" + t + "'");
    mpz_class den(denPart);
    if (den == 0) throw ParseError({line, tok.column}, "probability with zero denominator");
    return Rat(mpz_class(numPart), den);
}

}  // namespace

Mdp parseMdp(const std::string& text, const ParseOptions& opts) {
    Mdp model;
    std::string initialName, goalName;
    int initialLine = 0, goalLine = 0;

    auto stateIndex = [&](const Token& tok, int line) {
        if (!validIdent(tok.text))
            throw ParseError({line, tok.column}, "invalid identifier '" + tok.text + "'");
        if (!opts.internal && tok.text == kFailName)
            throw ParseError({line, tok.column}, "identifier '" + kFailName + "' is reserved");
        int idx = model.findState(tok.text);
        return idx >= 0 ? idx : model.addState(tok.text);
    };

    std::istringstream in(text);
    std::string rawLine;
    int lineNo = 0;
    int curState = -1;  // state of the most recent action header

    while (std::getline(in, rawLine)) {
        ++lineNo;
        if (!rawLine.empty() && rawLine.back() == '\r') rawLine.pop_back();
        std::vector<Token> toks = tokenize(rawLine);
        if (toks.empty()) continue;
        const std::string& head = toks[0].text;

        if (head == "@initial" || head == "@goal") {
            if (toks.size() != 2)
                throw ParseError({lineNo, toks[0].column}, head + " expects exactly one identifier");
            if (head == "@initial") {
                if (initialLine) throw ParseError({lineNo, toks[0].column}, "duplicate @initial");
                initialName = toks[1].text;
                initialLine = lineNo;
            } else {
                if (goalLine) throw ParseError({lineNo, toks[0].column}, "duplicate @goal");
                goalName = toks[1].text;
                goalLine = lineNo;
            }
            stateIndex(toks[1], lineNo);
        } else if (head == "action") {
            if (toks.size() != 4)
                throw ParseError({lineNo, toks[0].column}, "action header expects: action STATE LABEL INT");
            int s = stateIndex(toks[1], lineNo);
            if (!validIdent(toks[2].text))
                throw ParseError({lineNo, toks[2].column}, "invalid action label '" + toks[2].text + "'");
            if (!validInt(toks[3].text))
                throw ParseError({lineNo, toks[3].column}, "invalid weight '" + toks[3].text + "'");
            for (const Action& a : model.actions[s])
                if (a.label == toks[2].text)
                    throw ParseError({lineNo, toks[2].column},
                                     "duplicate action label '" + toks[2].text + "' at state '" + toks[1].text + "'");
            Action act;
            act.label = toks[2].text;
            act.weight = Weight(toks[3].text);
            model.actions[s].push_back(std::move(act));
            curState = s;
        } else if (head == "->") {
            if (curState < 0)
                throw ParseError({lineNo, toks[0].column}, "branch line before any action header");
            if (toks.size() != 3)
                throw ParseError({lineNo, toks[0].column}, "branch expects: -> TARGET RAT");
            Branch br;
            br.target = stateIndex(toks[1], lineNo);
            br.prob = parseProb(toks[2], lineNo);
            model.actions[curState].back().branches.push_back(br);
        } else {
            throw ParseError({lineNo, toks[0].column}, "unrecognized directive '" + head + "'");
        }
    }

    if (!initialLine) throw ParseError({lineNo + 1, 1}, "missing @initial directive");
    if (!goalLine) throw ParseError({lineNo + 1, 1}, "missing @goal directive");
    model.initial = model.findState(initialName);
    model.goal = model.findState(goalName);

    // A goal with no declared actions gets the absorbing loop implicitly.
    if (model.actions[model.goal].empty()) {
        Action loop;
        loop.label = "loop";
        loop.weight = 0;
        loop.branches.push_back({model.goal, Rat(1)});
        model.actions[model.goal].push_back(std::move(loop));
    }

    ValidationReport report = validate(model);
    if (!report.empty()) {
        std::string msg = report[0].message;
        if (report.size() > 1) msg += " (+" + std::to_string(report.size() - 1) + " more)";
        throw ParseError({lineNo, 1}, msg);
    }
    return model;
}

Mdp parseMdpFile(const std::string& path, const ParseOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parseMdp(ss.str(), opts);
}

std::string serializeMdp(const Mdp& model) {
    std::ostringstream out;
    out << "@initial " << model.stateNames[model.initial] << "\n";
    out << "@goal " << model.stateNames[model.goal] << "\n";
    for (int s = 0; s < model.stateCount(); ++s) {
        for (const Action& act : model.actions[s]) {
            out << "action " << model.stateNames[s] << " " << act.label << " " << act.weight.get_str() << "\n";
            for (const Branch& br : act.branches)
                out << "-> " << model.stateNames[br.target] << " " << br.prob.toString() << "\n";
        }
    }
    return out.str();
}

}  // namespace mdpx
