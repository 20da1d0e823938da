#pragma once
// Character registry: mention normalization, preferred-name substitution and
// Jaccard-based duplicate suggestions.

#include <set>
#include <span>
#include <string>
#include <vector>

#include "arcweaver/core/ids.hpp"
#include "arcweaver/core/model.hpp"
#include "arcweaver/gateway/gateway.hpp"
#include "arcweaver/gateway/prompts.hpp"
#include "arcweaver/persistence/store.hpp"

namespace arcweaver::registry {

// Lowercase ASCII-alphanumeric word tokens of the preferred name and all
// alternative names. Bytes >= 0x80 count as word characters.
std::set<std::string> name_tokens(const Character& c);
std::set<std::string> word_tokens(std::string_view text);

// |T(a) ∩ T(b)| / |T(a) ∪ T(b)| over name_tokens. a and b must be different
// characters.
double jaccard_similarity(const Character& a, const Character& b);

struct DuplicateSuggestion {
  std::string first_id;  // first_id < second_id
  std::string second_id;
  double score = 0.0;
};

// All pairs scoring at least `threshold`, best first, then by id pair.
std::vector<DuplicateSuggestion> suggest_duplicates(std::span<const Character> registry,
                                                    double threshold = 0.5);

// Replaces alternative names with their owner's preferred name. Matching is
// case-sensitive, word-boundary anchored and longest-first; preferred names
// already present are left alone. Alternative names claimed by more than one
// character, or equal to another character's preferred name, are ambiguous
// and never substituted. Substitution repeats until the text is stable, so
// applying it twice equals applying it once.
std::string replace_with_preferred(const std::string& text, std::span<const Character> registry);

// Asks the gateway how to map raw mentions onto the existing registry and
// returns every character that was created or changed. The result, applied
// over `existing`, satisfies the registry invariants.
std::vector<Character> normalize_mentions(const std::vector<std::string>& mentions,
                                          const std::vector<Character>& existing,
                                          const std::string& series, LlmGateway& gateway,
                                          PromptLibrary& prompts, IdGenerator& ids);

// Folds `remove` into `keep`: names move to keep's alternatives, every arc and
// progression reference is rewritten, and remove is deleted. Atomic.
Character merge_characters(const std::string& keep_id, const std::string& remove_id, Store& store);

// Case-insensitive lookup of a name against preferred and alternative names.
// Returns the character id or an empty string.
std::string resolve_name(std::string_view name, std::span<const Character> registry);

}  // namespace arcweaver::registry
