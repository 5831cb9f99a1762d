#pragma once

// Three-turn replay of the throne-succession episode used by the protocol
// replay tests, plus a toy corpus holding the passages it needs.

#include <string>
#include <vector>

#include "agentqpp/types.hpp"

namespace fixture {

inline const std::string kQuestion = "who will take the throne after the queen dies?";
inline const std::string kGold = "Charles, Prince of Wales";

inline const std::string kQuery1 = "who will take the throne after the queen dies";
inline const std::string kQuery2 = "heir apparent to Queen Elizabeth II";

// Raw completions as a server would produce them before stop-sequence
// truncation (the trailing text after the stop string is never returned).
inline const std::vector<std::string> kTurns = {
    "<think>I need to find out who will take the throne after the queen dies. I'll search for it.</think> "
    "<search> " + kQuery1 + " </search>",
    "<think>I found out that after the queen dies, her heir apparent will take the throne. I need to find out who "
    "the heir apparent is for Queen Elizabeth II.</think> <search> " + kQuery2 + " </search>",
    "<think>I found out that the heir apparent to Queen Elizabeth II is her eldest son, Charles, Prince of Wales. "
    "Now I can provide the answer.</think> <answer> " + kGold + " </answer>",
};

inline std::vector<agentqpp::Document> succession_corpus() {
    return {
        {"s1", "Succession to the British throne",
         "Catholics are eligible to be in the line of succession. When the queen dies the throne passes at once to "
         "the heir, who will take the throne as the new monarch."},
        {"s2", "Heir apparent",
         "rank behind her brothers regardless of their ages. An heir apparent is first in line. The heir apparent to "
         "Queen Elizabeth II is her eldest son, Charles, Prince of Wales."},
        {"s3", "Monarchy of the United Kingdom",
         "The monarchy of the United Kingdom is the constitutional form of government of the kingdom."},
        {"s4", "Coronation",
         "A coronation is a ceremony held some months after a new monarch accedes."},
        {"s5", "Queen consort",
         "A queen consort is the wife of a reigning king and usually shares his rank."},
        {"s6", "Line of succession",
         "The line of succession lists the people eligible to succeed, ordered by primogeniture."},
    };
}

}  // namespace fixture
