#include "lnsim/codec.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

namespace lnsim {

// ==================== Codebook construction ====================

namespace {

// Tree node for the n-ary merge.  tie_key is the smallest character code in
// the subtree (dummies sort last), which makes the build order — and thus
// the emitted codes — independent of heap internals.
struct BuildNode {
    std::uint64_t weight = 0;
    std::uint32_t tie_key = 0;
    char symbol = 0;
    bool is_leaf = false;
    std::vector<int> children;  // indices into the node pool
};

struct NodeOrder {
    const std::vector<BuildNode>* pool;
    bool operator()(int a, int b) const {
        const BuildNode& na = (*pool)[a];
        const BuildNode& nb = (*pool)[b];
        if (na.weight != nb.weight) return na.weight > nb.weight;  // min-heap
        return na.tie_key > nb.tie_key;
    }
};

void assign_codes(const std::vector<BuildNode>& pool, int node, const std::string& prefix,
                  std::map<char, std::string>& out) {
    const BuildNode& n = pool[node];
    if (n.is_leaf) {
        if (n.tie_key <= 0xff) out[n.symbol] = prefix.empty() ? "1" : prefix;
        return;  // dummies (tie_key > 0xff) get no code
    }
    for (std::size_t i = 0; i < n.children.size(); ++i) {
        assign_codes(pool, n.children[i], prefix + static_cast<char>('1' + i), out);
    }
}

}  // namespace

Codebook Codebook::build(const std::map<char, std::uint64_t>& weights, int arity) {
    if (arity < 2 || arity > 9) throw SimError("codebook: arity must be in 2..9");
    if (weights.empty()) throw SimError("codebook: empty symbol set");

    std::vector<BuildNode> pool;
    std::priority_queue<int, std::vector<int>, NodeOrder> heap{NodeOrder{&pool}};
    // priority_queue copies the comparator once; rebuild below after pool
    // stops reallocating is not needed because NodeOrder holds a pointer.

    for (const auto& [ch, w] : weights) {
        BuildNode n;
        n.weight = w;
        n.tie_key = static_cast<unsigned char>(ch);
        n.symbol = ch;
        n.is_leaf = true;
        pool.push_back(n);
    }
    // Pad with zero-weight dummies so (count - 1) % (arity - 1) == 0; keeps
    // the merge tree full and the real codes as short as possible.
    std::uint32_t dummy_key = 0x100;
    while ((pool.size() - 1) % static_cast<std::size_t>(arity - 1) != 0) {
        BuildNode n;
        n.weight = 0;
        n.tie_key = dummy_key++;
        n.is_leaf = true;
        pool.push_back(n);
    }
    for (std::size_t i = 0; i < pool.size(); ++i) heap.push(static_cast<int>(i));

    while (heap.size() > 1) {
        BuildNode parent;
        parent.tie_key = UINT32_MAX;
        for (int i = 0; i < arity; ++i) {
            const int child = heap.top();
            heap.pop();
            parent.weight += pool[child].weight;
            parent.tie_key = std::min(parent.tie_key, pool[child].tie_key);
            parent.children.push_back(child);
        }
        pool.push_back(parent);
        heap.push(static_cast<int>(pool.size()) - 1);
    }

    std::map<char, std::string> codes;
    assign_codes(pool, heap.top(), "", codes);

    Codebook book;
    book.arity_ = arity;
    book.codes_ = std::move(codes);
    return book;
}

Codebook Codebook::from_entries(const std::map<char, std::string>& entries, int arity) {
    if (arity < 2 || arity > 9) throw SimError("codebook: arity must be in 2..9");
    if (entries.empty()) throw SimError("codebook: empty symbol set");
    for (const auto& [ch, code] : entries) {
        (void)ch;
        if (code.empty()) throw SimError("codebook: empty code word");
        for (char d : code) {
            if (d < '1' || d >= '1' + arity)
                throw SimError("codebook: digit outside 1.." + std::to_string(arity));
        }
    }
    Codebook book;
    book.arity_ = arity;
    book.codes_ = entries;
    if (!verify_prefix_free(book)) throw SimError("codebook: table is not prefix-free");
    return book;
}

const Codebook& Codebook::default_quaternary() {
    static const Codebook book = from_entries(
        {
            {'s', "234"}, {'n', "233"}, {'o', "232"}, {'h', "231"},
            {'d', "224"}, {'g', "223"}, {'c', "222"}, {'9', "221"},
            {'6', "214"}, {'2', "213"}, {'3', "212"}, {'u', "211"},
            {'p', "144"}, {'i', "143"}, {'8', "142"}, {'0', "141"},
            {'.', "24"},  {'1', "12"},  {'-', "13"},  {'E', "4"},
            {' ', "11"},  {'S', "3"},
        },
        4);
    return book;
}

Codebook Codebook::load(std::istream& in, int arity) {
    std::map<char, std::string> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        long codepoint = 0;
        std::string code;
        if (!(ls >> codepoint)) continue;  // blank line
        if (!(ls >> code))
            throw SimError("codebook line " + std::to_string(lineno) + ": missing code");
        std::string extra;
        if (ls >> extra)
            throw SimError("codebook line " + std::to_string(lineno) + ": trailing tokens");
        if (codepoint < 0 || codepoint > 0xff)
            throw SimError("codebook line " + std::to_string(lineno) + ": codepoint out of range");
        const char ch = static_cast<char>(codepoint);
        if (entries.count(ch))
            throw SimError("codebook line " + std::to_string(lineno) + ": duplicate symbol");
        entries[ch] = code;
    }
    return from_entries(entries, arity);
}

Codebook Codebook::load_file(const std::string& path, int arity) {
    std::ifstream in(path);
    if (!in) throw SimError("codebook: cannot open " + path);
    return load(in, arity);
}

void Codebook::save(std::ostream& out) const {
    for (const auto& [ch, code] : codes_) {
        out << static_cast<int>(static_cast<unsigned char>(ch)) << ' ' << code << '\n';
    }
}

const std::string* Codebook::code_for(char c) const {
    const auto it = codes_.find(c);
    return it == codes_.end() ? nullptr : &it->second;
}

std::uint64_t Codebook::weighted_length(const std::map<char, std::uint64_t>& weights) const {
    std::uint64_t total = 0;
    for (const auto& [ch, w] : weights) {
        const std::string* code = code_for(ch);
        if (!code) throw SimError(std::string("codebook: no code for '") + ch + "'");
        total += w * code->size();
    }
    return total;
}

bool verify_prefix_free(const Codebook& book) {
    if (book.size() == 0) return false;
    const auto& entries = book.entries();
    for (auto a = entries.begin(); a != entries.end(); ++a) {
        for (auto b = entries.begin(); b != entries.end(); ++b) {
            if (a == b) continue;
            const std::string& pa = a->second;
            const std::string& pb = b->second;
            if (pb.size() >= pa.size() && pb.compare(0, pa.size(), pa) == 0) return false;
        }
    }
    return true;
}

// ==================== Encoding schemes ====================

EncodingScheme EncodingScheme::huffman(Codebook book) {
    if (book.size() == 0) throw SimError("huffman scheme: empty codebook");
    if (book.arity() > 4)
        throw SimError("huffman scheme: arity > 4 collides with frame sentinels");
    if (!verify_prefix_free(book)) throw SimError("huffman scheme: codebook not prefix-free");
    EncodingScheme s;
    s.kind = Kind::huffman;
    s.codebook = std::move(book);
    return s;
}

const char* to_string(DecodeErrorKind kind) {
    switch (kind) {
        case DecodeErrorKind::invalid_symbol: return "invalid_symbol";
        case DecodeErrorKind::incomplete_code: return "incomplete_code";
        case DecodeErrorKind::invalid_code: return "invalid_code";
    }
    return "?";
}

DecodeResult DecodeResult::success(std::string t) {
    DecodeResult r;
    r.ok = true;
    r.text = std::move(t);
    return r;
}

DecodeResult DecodeResult::failure(DecodeErrorKind kind) {
    DecodeResult r;
    r.ok = false;
    r.error = kind;
    return r;
}

std::vector<Sat> encode(const std::string& command, const EncodingScheme& scheme) {
    std::vector<Sat> out;
    if (scheme.kind == EncodingScheme::Kind::ascii) {
        out.reserve(command.size());
        for (char c : command) {
            const Sat amount = static_cast<unsigned char>(c);
            if (amount < kAsciiMin || amount > kAsciiMax)
                throw SimError("encode: character code " + std::to_string(amount) +
                               " outside printable range");
            out.push_back(amount);
        }
        return out;
    }
    for (char c : command) {
        const std::string* code = scheme.codebook.code_for(c);
        if (!code)
            throw SimError(std::string("encode: no code word for '") + c + "'");
        for (char digit : *code) out.push_back(digit - '0');
    }
    return out;
}

DecodeResult decode(const std::vector<Sat>& amounts, const EncodingScheme& scheme) {
    if (scheme.kind == EncodingScheme::Kind::ascii) {
        std::string text;
        text.reserve(amounts.size());
        for (Sat a : amounts) {
            if (a < kAsciiMin || a > kAsciiMax)
                return DecodeResult::failure(DecodeErrorKind::invalid_symbol);
            text.push_back(static_cast<char>(a));
        }
        return DecodeResult::success(std::move(text));
    }

    // Walk the digit stream against the code table.  The table is small, so
    // a longest-prefix scan per symbol is plenty; no trie needed.
    const auto& entries = scheme.codebook.entries();
    const int arity = scheme.codebook.arity();
    std::string text;
    std::string pending;
    for (Sat a : amounts) {
        if (a < 1 || a > arity)
            return DecodeResult::failure(DecodeErrorKind::invalid_symbol);
        pending.push_back(static_cast<char>('0' + a));
        bool matched = false;
        bool viable = false;  // pending is still a proper prefix of some code
        for (const auto& [ch, code] : entries) {
            if (code == pending) {
                text.push_back(ch);
                pending.clear();
                matched = true;
                break;
            }
            if (code.size() > pending.size() && code.compare(0, pending.size(), pending) == 0)
                viable = true;
        }
        if (!matched && !viable)
            return DecodeResult::failure(DecodeErrorKind::invalid_code);
    }
    if (!pending.empty())
        return DecodeResult::failure(DecodeErrorKind::incomplete_code);
    return DecodeResult::success(std::move(text));
}

std::vector<Sat> frame(std::vector<Sat> payload) {
    std::vector<Sat> framed;
    framed.reserve(payload.size() + 2);
    framed.push_back(kFrameStart);
    framed.insert(framed.end(), payload.begin(), payload.end());
    framed.push_back(kFrameEnd);
    return framed;
}

std::vector<Sat> deframe(const std::vector<Sat>& framed) {
    if (framed.size() < 2) throw SimError("deframe: sequence shorter than a frame");
    if (framed.front() != kFrameStart) throw SimError("deframe: missing start sentinel");
    if (framed.back() != kFrameEnd) throw SimError("deframe: missing end sentinel");
    std::vector<Sat> payload(framed.begin() + 1, framed.end() - 1);
    for (Sat a : payload) {
        if (a == kFrameStart || a == kFrameEnd)
            throw SimError("deframe: sentinel amount inside payload");
    }
    return payload;
}

Sat sequence_cost(const std::vector<Sat>& amounts) {
    Sat total = 0;
    for (Sat a : amounts) total += a;
    return total;
}

std::map<char, std::uint64_t> char_frequencies(const std::string& text) {
    std::map<char, std::uint64_t> freq;
    for (char c : text) ++freq[c];
    return freq;
}

std::map<char, std::uint64_t> load_frequencies(std::istream& in) {
    std::map<char, std::uint64_t> freq;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        long codepoint = 0;
        std::uint64_t weight = 0;
        if (!(ls >> codepoint)) continue;
        if (!(ls >> weight))
            throw SimError("frequency line " + std::to_string(lineno) + ": missing weight");
        if (codepoint < 0 || codepoint > 0xff)
            throw SimError("frequency line " + std::to_string(lineno) + ": codepoint out of range");
        freq[static_cast<char>(codepoint)] += weight;
    }
    if (freq.empty()) throw SimError("frequency table: no entries");
    return freq;
}

}  // namespace lnsim
