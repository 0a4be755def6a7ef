#!/usr/bin/env python3
"""Rebuild the bundled fixture problems under ``fixtures/``.

Every fixture directory gets a ``problem.xml`` (Moodle CodeRunner export) and
a ``recordings/`` store of replayable LLM exchanges. The model responses are
hand-written below; they are pushed through the real prompt pipeline with a
recording provider, so the stored request digests always match the current
prompt templates. Rerun this script after editing any prompt template.

p07 additionally gets ``submissions.csv`` and ``labels.json`` (hand grades).
"""
from __future__ import annotations

import argparse
import json
import shutil
import sys
import xml.etree.ElementTree as ET
from datetime import datetime, timedelta, timezone
from pathlib import Path

from testforge.ingest import parse_moodle_xml, write_submissions_csv
from testforge.llm import ChatResponse, FixtureStore, RecordingProvider
from testforge.model import ProblemKind, Submission, TokenUsage
from testforge.prompts import generate_suite_source, harness_contract

ROOT = Path(__file__).resolve().parent.parent / "fixtures"


# -- p05: next letter ---------------------------------------------------------------

P05_REF = r"""#include <stdio.h>

int main(void)
{
    char letter;

    printf("Enter a letter: ");
    scanf("%c", &letter);
    printf("%c ==> %c\n", letter, letter + 1);

    return 0;
}
"""

P05_DETAILED = {
    "Scenario": "The program asks the user for a single letter of the alphabet and shows the letter that comes "
                "right after it, together with the original letter and an arrow.",
    "Inputs": "One character read from standard input. It is an uppercase or lowercase letter of the English "
              "alphabet, followed by a newline.",
    "Outputs": "The prompt \"Enter a letter: \" followed by the input letter, the text \" ==> \" and the next "
               "letter, then a newline.",
    "Example": "Input: a\nOutput: Enter a letter: a ==> b",
    "Limits": "The input letter is never 'z' or 'Z'.",
}

P05_GEN = r"""Edge-cases:
1. The first lowercase letter: a
2. The first uppercase letter: A
3. The last allowed lowercase letter: y
4. The last allowed uppercase letter: Y
5. A letter in the middle of the alphabet: m
6. 'z' wraps past the alphabet.

Reflection: edge-case 6 is not allowed because the input is never 'z' or 'Z', so it is removed.

```python
import json
import random

random.seed(5)

tests = []
for letter in ["a", "A", "y", "Y", "m", "M"]:
    tests.append({"input": letter + "\n"})

letters = "abcdefghijklmnopqrstuvwxyABCDEFGHIJKLMNOPQRSTUVWXY"
for _ in range(100):
    tests.append({"input": random.choice(letters) + "\n"})

print(json.dumps(tests))
```
"""

# -- p11: times two --------------------------------------------------------------

P11_REF = r"""#include <stdio.h>

int main(void)
{
    int value;

    scanf("%d", &value);
    printf("%d x 2 = %d\n", value, value * 2);

    return 0;
}
"""

P11_DETAILED = {
    "Scenario": "The program reads an integer and prints an equation showing that integer multiplied by two.",
    "Inputs": "A single integer on one line of standard input.",
    "Outputs": "One line of the form \"<value> x 2 = <result>\" where result is twice the value.",
    "Example": "Input: 7\nOutput: 7 x 2 = 14",
    "Limits": "The value and its double both fit in a 32-bit signed int.",
}

P11_PROSE = """To test this program I would check zero, negative numbers, small positive numbers and the largest
values whose double still fits in an int, then add a batch of random integers within that range."""

P11_GEN = r"""```python
import json
import random

random.seed(11)

tests = [{"input": f"{v}\n"} for v in [0, 1, -1, 7, 1073741823, -1073741824]]
for _ in range(100):
    tests.append({"input": f"{random.randint(-1000000, 1000000)}\n"})

print(json.dumps(tests))
```
"""

# -- p24: shipping containers -----------------------------------------------------------

P24_REF = r"""#include <stdio.h>

int main(void)
{
    int large, small, items;
    int numLarge, numSmall, scrap;

    printf("Large capacity:\n");
    scanf("%d", &large);
    printf("Small capacity:\n");
    scanf("%d", &small);
    printf("Number of items:\n");
    scanf("%d", &items);

    numLarge = items / large;
    items = items % large;
    numSmall = items / small;
    scrap = items % small;

    printf("Allocated:\n");
    printf("- Large: %d\n", numLarge);
    printf("- Small: %d\n", numSmall);
    printf("- Scrap: %d\n", scrap);

    return 0;
}
"""

P24_STATEMENT = (
    "<p>You have been hired by a shipping company that ships items using large and small containers.</p>"
    "<p><img src=\"@@PLUGINFILE@@/containers.png\" alt=\"two containers\"></p>"
    "<p>Use as many large containers as possible, and never ship a container that is not completely full. "
    "Left over items are scrapped.</p>"
    "<p>Write a program which prompts the user for the capacity of a large container, the capacity of a "
    "small container and the number of items, then displays how many containers of each size are needed "
    "and how many items are scrapped. The large capacity is greater than the small capacity, and the small "
    "capacity is greater than 0.</p>"
    "<pre>Large capacity:\n8\nSmall capacity:\n3\nNumber of items:\n31\nAllocated:\n- Large: 3\n"
    "- Small: 2\n- Scrap: 1</pre>"
)

P24_DETAILED = {
    "Scenario": "Items are packed into full large containers first, then full small containers; whatever is "
                "left is scrapped.",
    "Inputs": "Three integers, one per line: the large capacity, the small capacity and the number of items.",
    "Outputs": "The three prompts, each followed by a newline, then \"Allocated:\" and the lines "
               "\"- Large: L\", \"- Small: S\" and \"- Scrap: R\".",
    "Example": "Input: 8, 3, 31\nOutput: 3 large, 2 small, 1 scrapped",
    "Limits": "Capacities are positive and the large capacity exceeds the small one. The number of items is "
              "not negative.",
}

P24_GEN = r"""Edge-cases:
1. The example order: 8, 3, 31
2. No items: 8, 3, 0
3. Items fill large containers exactly: 5, 2, 20
4. Fewer items than the small capacity: 10, 4, 3
5. Small capacity of zero: 8, 0, 31
6. Large capacity one more than small: 4, 3, 50

Reflection: all of these look reasonable for the program.

```python
import json
import random

random.seed(24)

def case(large, small, items):
    return {"input": f"{large}\n{small}\n{items}\n"}

tests = [
    case(8, 3, 31),
    case(8, 3, 0),
    case(5, 2, 20),
    case(10, 4, 3),
    case(8, 0, 31),
    case(4, 3, 50),
]
for _ in range(100):
    small = random.randint(1, 20)
    large = random.randint(small + 1, 50)
    tests.append(case(large, small, random.randint(0, 1000)))

print(json.dumps(tests))
```
"""

# -- p07: one letter difference ------------------------------------------------------

P07_EXTRA = "#define WORD_LENGTH 5\n"

P07_REF = r"""int OneLetterDifference(char *word1, char *word2)
{
    int i;
    int differences = 0;

    for (i = 0; i < WORD_LENGTH - 1; i++) {
        if (word1[i] != word2[i]) {
            differences++;
        }
    }
    return differences == 1;
}
"""

P07_INSTRUCTOR = [
    ('if (OneLetterDifference("cold", "cord")) {\n'
     '    printf("The words differ by just one character");\n'
     '} else {\n'
     '    printf("The words do not differ by just one character");\n'
     '}\n',
     "The words differ by just one character"),
    ('char words[3][WORD_LENGTH] = {"card", "ward", "warm"};\n'
     'printf("a: %d\\n", OneLetterDifference(words[0], words[2]));\n'
     'printf("b: %d\\n", OneLetterDifference(words[0], words[1]));\n'
     'printf("c: %d\\n", OneLetterDifference(words[1], words[2]));\n',
     "a: 0\nb: 1\nc: 1\n"),
    ('if (OneLetterDifference("cold", "cold")) {\n'
     '    printf("The words differ by just one character");\n'
     '} else {\n'
     '    printf("The words do not differ by just one character");\n'
     '}\n',
     "The words do not differ by just one character"),
    ('char words[3][WORD_LENGTH] = {"lamp", "limp", "limb"};\n'
     'printf("a: %d\\n", OneLetterDifference(words[0], words[1]));\n'
     'printf("b: %d\\n", OneLetterDifference(words[0], words[0]));\n'
     'printf("c: %d\\n", OneLetterDifference(words[1], words[2]));\n',
     "a: 1\nb: 0\nc: 1\n"),
    ('if (OneLetterDifference("cold", "warm")) {\n'
     '    printf("The words differ by just one character");\n'
     '} else {\n'
     '    printf("The words do not differ by just one character");\n'
     '}\n',
     "The words do not differ by just one character"),
    ('if (OneLetterDifference("warm", "worm")) {\n'
     '    printf("The words differ by just one character");\n'
     '} else {\n'
     '    printf("The words do not differ by just one character");\n'
     '}\n',
     "The words differ by just one character"),
]

P07_STATEMENT = (
    "<p>Carefully review the word chain game described in the lab preparation document.</p>"
    "<p>Define the function <code>int OneLetterDifference(char *word1, char *word2)</code>. Both words come "
    "from a word list of four letter words. The function compares the words character by character and "
    "returns 1 only if exactly one character differs; otherwise it returns 0.</p>"
    "<p>Note: the constant WORD_LENGTH is defined to be 5 (four characters plus the null terminator).</p>"
)

P07_DETAILED = {
    "Scenario": "In a word chain game, consecutive words may differ in exactly one position. The function "
                "decides whether two words satisfy that rule.",
    "Inputs": "Two null-terminated strings of exactly four characters each (WORD_LENGTH is 5).",
    "Outputs": "The function returns 1 if exactly one position holds different characters and 0 otherwise. "
               "It prints nothing.",
    "Example": "OneLetterDifference(\"cold\", \"cord\") returns 1; OneLetterDifference(\"cold\", \"warm\") "
               "returns 0.",
    "Limits": "Both words always have length 4. Characters are compared exactly, so case matters.",
}

P07_TESTS = r"""    {
        printf("<<TEST 1 BEGIN>>\n");
        printf("%d\n", OneLetterDifference("word", "word"));
        printf("<<TEST 1 END>>\n");
    }
    {
        printf("<<TEST 2 BEGIN>>\n");
        printf("%d\n", OneLetterDifference("cold", "bold"));
        printf("<<TEST 2 END>>\n");
    }
    {
        printf("<<TEST 3 BEGIN>>\n");
        printf("%d\n", OneLetterDifference("cold", "colt"));
        printf("<<TEST 3 END>>\n");
    }
    {
        printf("<<TEST 4 BEGIN>>\n");
        printf("%d\n", OneLetterDifference("abcd", "wxyz"));
        printf("<<TEST 4 END>>\n");
    }
    {
        printf("<<TEST 5 BEGIN>>\n");
        printf("%d\n", OneLetterDifference("card", "curt"));
        printf("<<TEST 5 END>>\n");
    }
    {
        printf("<<TEST 6 BEGIN>>\n");
        printf("%d\n", OneLetterDifference("Cold", "cold"));
        printf("<<TEST 6 END>>\n");
    }
    {
        printf("<<TEST 7 BEGIN>>\n");
        for (int i = 0; i < 100; i++) {
            char word1[WORD_LENGTH];
            char word2[WORD_LENGTH];
            for (int j = 0; j < WORD_LENGTH - 1; j++) {
                word1[j] = 'a' + rand() % 26;
            }
            word1[WORD_LENGTH - 1] = '\0';
            strcpy(word2, word1);
            word2[rand() % (WORD_LENGTH - 1)] = 'a' + rand() % 26;
            if (rand() % 2) {
                word2[rand() % (WORD_LENGTH - 1)] = 'a' + rand() % 26;
            }
            printf("Test starting\n");
            printf("Comparing %s and %s: %d\n", word1, word2, OneLetterDifference(word1, word2));
            printf("Test ending\n");
        }
        printf("<<TEST 7 END>>\n");
    }
"""

P07_PREAMBLE = """Edge-cases:
1. Identical words: OneLetterDifference("word", "word")
2. Difference in the first character: OneLetterDifference("cold", "bold")
3. Difference in the last character: OneLetterDifference("cold", "colt")
4. Every character differs: OneLetterDifference("abcd", "wxyz")
5. Two characters differ: OneLetterDifference("card", "curt")
6. Same letters with different case: OneLetterDifference("Cold", "cold")
7. Words of different length: OneLetterDifference("cold", "colder")

Reflection: edge-case 7 is not allowed because both words always have length 4, so it is removed.

"""


def _sub(code):
    return code.strip("\n") + "\n"


# hand-labelled corpus: (code, recorded_correct, llm_grade, instructor_grade)
P07_SUBMISSIONS = [
    (_sub(r"""
int OneLetterDifference(char *word1, char *word2)
{
    int count = 0;
    for (int i = 0; i < 4; i++) {
        if (word1[i] != word2[i]) {
            count++;
        }
    }
    if (count == 1) {
        return 1;
    }
    return 0;
}
"""), 1, 1, 1),
    (_sub(r"""
int OneLetterDifference(char *word1, char *word2)
{
    int count = 0;
    for (int i = 0; i < WORD_LENGTH - 1; i++) {
        if (word1[i] != word2[i]) {
            count++;
        }
    }
    return count > 0;
}
"""), 0, 0, 0),
    (_sub(r"""
int OneLetterDifference(char *word1, char *word2)
{
    int i = 0;
    int diff = 0;
    while (word1[i] != '\0') {
        if (word1[i] != word2[i]) {
            diff++;
            if (diff > 1) {
                return 0;
            }
        }
        i++;
    }
    return diff == 1;
}
"""), 1, 1, 1),
    (_sub(r"""
#include <string.h>

int OneLetterDifference(char *word1, char *word2)
{
    int n = 0;
    int len = strlen(word1);
    for (int k = 0; k < len; k++) {
        n += word1[k] != word2[k];
    }
    return n == 1;
}
"""), 1, 1, 1),
    (_sub(r"""
int OneLetterDifference(char *word1, char *word2)
{
    int count = 0
    for (int i = 0; i < WORD_LENGTH - 1; i++) {
        if (word1[i] != word2[i]) {
            count++;
        }
    }
    return count == 1;
}
"""), 0, -1, -1),
    (_sub(r"""
int CountDiff(char *a, char *b)
{
    if (*a == '\0') {
        return 0;
    }
    return (*a != *b) + CountDiff(a + 1, b + 1);
}

int OneLetterDifference(char *word1, char *word2)
{
    return CountDiff(word1, word2) == 1;
}
"""), 1, 1, 1),
    (_sub(r"""
int OneLetterDifference(char *word1, char *word2)
{
    int same = 0;
    char *p = word1;
    char *q = word2;
    while (*p) {
        if (*p == *q) {
            same++;
        }
        p++;
        q++;
    }
    return same == WORD_LENGTH - 2;
}
"""), 1, 1, 1),
    (_sub(r"""
int OneLetterDifference(char *word1, char *word2)
{
    int i;
    int count = 0;
    for (i = 0; i < WORD_LENGTH - 2; i++) {
        if (word1[i] != word2[i]) {
            count++;
        }
    }
    return count == 1;
}
"""), 0, 0, 0),
    (_sub(r"""
int OneLetterDifference(char *word1, char *word2)
{
    int d = (word1[0] != word2[0]) + (word1[1] != word2[1]) + (word1[2] != word2[2]) + (word1[3] != word2[3]);
    return d == 1 ? 1 : 0;
}
"""), 1, 1, 1),
    (_sub(r"""
#include <stdbool.h>

int OneLetterDifference(char *word1, char *word2)
{
    bool found = false;
    for (int i = 0; i < WORD_LENGTH - 1; i++) {
        if (word1[i] != word2[i]) {
            if (found) {
                return false;
            }
            found = true;
        }
    }
    return found;
}
"""), 1, 1, 1),
]

# -- p25: reverse an array ---------------------------------------------------------------

P25_REF = r"""void ReverseArray(int *values, int numValues)
{
    int i;
    int temp;

    for (i = 0; i < numValues / 2; i++) {
        temp = values[i];
        values[i] = values[numValues - 1 - i];
        values[numValues - 1 - i] = temp;
    }
}
"""


def _p25_test(values):
    n = len(values)
    init = ", ".join(str(v) for v in values)
    code = (f"int values[{n}] = {{{init}}};\n"
            f"int i;\n"
            f"ReverseArray(values, {n});\n"
            f"for (i = 0; i < {n}; i++) {{\n"
            f"    printf(\"%d \", values[i]);\n"
            f"}}\n"
            f"printf(\"\\n\");\n")
    return code, " ".join(str(v) for v in reversed(values)) + " \n"


P25_INSTRUCTOR = [_p25_test([1, 2, 3, 4, 5]), _p25_test([10, 20, 30, 40]), _p25_test([-7])]

P25_STATEMENT = (
    "<p>Define the function <code>void ReverseArray(int *values, int numValues)</code> which reverses the "
    "order of the elements of an array in place. The array holds at least one element.</p>"
)

P25_DETAILED = {
    "Scenario": "The function reverses the order of the elements of an integer array without using a second "
                "array.",
    "Inputs": "A pointer to an array of ints and the number of elements in it.",
    "Outputs": "Nothing is returned or printed; after the call the array holds its elements in reverse order.",
    "Example": "{1, 2, 3} becomes {3, 2, 1}.",
    "Limits": "The array holds at least one element.",
}

P25_TESTS = r"""    {
        printf("<<TEST 1 BEGIN>>\n");
        int values[1] = {42};
        ReverseArray(values, 1);
        printf("%d\n", values[0]);
        printf("<<TEST 1 END>>\n");
    }
    {
        printf("<<TEST 2 BEGIN>>\n");
        int values[2] = {1, 2};
        ReverseArray(values, 2);
        printf("%d %d\n", values[0], values[1]);
        printf("<<TEST 2 END>>\n");
    }
    {
        printf("<<TEST 3 BEGIN>>\n");
        int values[5] = {-3, 0, 3, INT_MAX, INT_MIN};
        ReverseArray(values, 5);
        for (int i = 0; i < 5; i++) {
            printf("%d ", values[i]);
        }
        printf("\n");
        printf("<<TEST 3 END>>\n");
    }
    {
        printf("<<TEST 4 BEGIN>>\n");
        int values[4] = {7, 7, 7, 7};
        ReverseArray(values, 4);
        for (int i = 0; i < 4; i++) {
            printf("%d ", values[i]);
        }
        printf("\n");
        printf("<<TEST 4 END>>\n");
    }
    {
        printf("<<TEST 5 BEGIN>>\n");
        for (int t = 0; t < 100; t++) {
            int n = 1 + rand() % 20;
            int values[20];
            for (int i = 0; i < n; i++) {
                values[i] = rand() % 2001 - 1000;
            }
            ReverseArray(values, n);
            for (int i = 0; i < n; i++) {
                printf("%d ", values[i]);
            }
            printf("\n");
        }
        printf("<<TEST 5 END>>\n");
    }
"""

P25_PREAMBLE = """Edge-cases:
1. A single element: {42}
2. Two elements: {1, 2}
3. Odd length with extreme values: {-3, 0, 3, INT_MAX, INT_MIN}
4. All elements equal: {7, 7, 7, 7}

Reflection: every edge-case holds at least one element, so all of them are kept.

"""

# -- p14: file based, excluded ---------------------------------------------------------------

P14_REF = r"""#include <stdio.h>

int main(void)
{
    FILE *fp = fopen("values.txt", "r");
    int value;
    int buckets[10] = {0};

    while (fscanf(fp, "%d", &value) == 1) {
        buckets[value / 10]++;
    }
    fclose(fp);
    for (int i = 0; i < 10; i++) {
        printf("%2d: ", i * 10);
        for (int j = 0; j < buckets[i]; j++) {
            printf("X");
        }
        printf("\n");
    }
    return 0;
}
"""


# -- writers -------------------------------------------------------------------------------

def _text(parent, tag, value, **attrs):
    el = ET.SubElement(parent, tag, attrs)
    ET.SubElement(el, "text").text = value
    return el


def problem_xml(pid, name, kind, statement_html, reference, tests, extra=None) -> bytes:
    quiz = ET.Element("quiz")
    cat = ET.SubElement(quiz, "question", type="category")
    _text(cat, "category", "$course$/top/Lab exercises")
    q = ET.SubElement(quiz, "question", type="coderunner")
    _text(q, "name", name)
    _text(q, "questiontext", statement_html, format="html")
    ET.SubElement(q, "idnumber").text = pid
    ET.SubElement(q, "coderunnertype").text = "c_program" if kind is ProblemKind.FULL_PROGRAM else "c_function"
    ET.SubElement(q, "answer").text = reference
    ET.SubElement(q, "globalextra").text = extra or ""
    cases = ET.SubElement(q, "testcases")
    for payload, expected in tests:
        tc = ET.SubElement(cases, "testcase", testtype="0", useasexample="0", hiderestiffail="0", mark="1.0")
        if kind is ProblemKind.FULL_PROGRAM:
            _text(tc, "testcode", "")
            _text(tc, "stdin", payload)
        else:
            _text(tc, "testcode", payload)
            _text(tc, "stdin", "")
        _text(tc, "expected", expected)
        _text(tc, "extra", "")
        _text(tc, "display", "SHOW")
    ET.indent(quiz)
    return b'<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(quiz, encoding="utf-8") + b"\n"


def _response(text, request_chars):
    return ChatResponse(text=text, usage=TokenUsage(request_chars // 4, len(text) // 4), latency=0.0)


class _Sizer:
    """Scripted provider that fills in token counts from the request size."""

    def __init__(self, texts):
        self._texts = list(texts)

    def send(self, request):
        chars = sum(len(c) for _, c in request.messages)
        return _response(self._texts.pop(0), chars)


def function_response(problem, preamble, tests_block):
    contract = harness_contract(problem)
    program = contract.replace("    // Add the tests here\n", tests_block)
    return preamble + "```c\n" + program + "```\n"


def record(directory: Path, xml: bytes, responses):
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "problem.xml").write_bytes(xml)
    rec = directory / "recordings"
    shutil.rmtree(rec, ignore_errors=True)
    if responses is None:
        return
    [problem] = parse_moodle_xml(xml)
    texts = [r(problem) if callable(r) else r for r in responses]
    provider = RecordingProvider(_Sizer(texts), FixtureStore(rec))
    generate_suite_source(problem, provider)


def build(root: Path):
    full = ProblemKind.FULL_PROGRAM
    func = ProblemKind.FUNCTION

    p05_tests = [("a\n", "Enter a letter: a ==> b\n"), ("M\n", "Enter a letter: M ==> N\n"),
                 ("y\n", "Enter a letter: y ==> z \n")]
    record(root / "p05", problem_xml(
        "p05", "Next letter", full,
        "<p>Write a program that prompts the user to enter a letter of the alphabet, then displays the "
        "letter that follows it, along with the original letter and a stylized arrow.</p>"
        "<p>NOTE: you can assume that the input will not be 'z' or 'Z'.</p>",
        P05_REF, p05_tests), [json.dumps(P05_DETAILED, indent=2), P05_GEN])

    record(root / "p11", problem_xml(
        "p11", "Times two", full,
        "<p>Write a program that reads an integer and displays an equation showing the value being "
        "multiplied by two.</p>",
        P11_REF, [("7\n", "7 x 2 = 14\n"), ("-3\n", "-3 x 2 = -6\n"), ("0\n", "0 x 2 = 0\n")]),
        ["```json\n" + json.dumps(P11_DETAILED, indent=2) + "\n```", P11_PROSE, P11_GEN])

    p24_tests = [("8\n3\n31\n", "Large capacity:\nSmall capacity:\nNumber of items:\nAllocated:\n"
                                "- Large: 3\n- Small: 2\n- Scrap: 1\n"),
                 ("10\n4\n100\n", "Large capacity:\nSmall capacity:\nNumber of items:\nAllocated:\n"
                                  "- Large: 10\n- Small: 0\n- Scrap: 0\n"),
                 ("5\n2\n3\n", "Large capacity:\nSmall capacity:\nNumber of items:\nAllocated:\n"
                               "- Large: 0\n- Small: 1\n- Scrap: 1\n")]
    record(root / "p24", problem_xml("p24", "Shipping containers", full, P24_STATEMENT, P24_REF, p24_tests),
           [json.dumps(P24_DETAILED), P24_GEN])

    record(root / "p07", problem_xml(
        "p07", "One letter difference", func, P07_STATEMENT, P07_REF, P07_INSTRUCTOR, extra=P07_EXTRA),
        [json.dumps(P07_DETAILED, indent=2), lambda p: function_response(p, P07_PREAMBLE, P07_TESTS)])

    record(root / "p25", problem_xml("p25", "Reverse an array", func, P25_STATEMENT, P25_REF, P25_INSTRUCTOR),
           [json.dumps(P25_DETAILED, indent=2), lambda p: function_response(p, P25_PREAMBLE, P25_TESTS)])

    record(root / "p14", problem_xml(
        "p14", "Histogram from file", full,
        "<p>Read the integers stored in values.txt, group them into buckets of ten and print a histogram "
        "using the letter X for each value in a bucket.</p>",
        P14_REF, [("", " 0: X\n")]), None)

    start = datetime(2023, 9, 18, 9, 0, tzinfo=timezone.utc)
    subs, labels = [], {}
    for n, (code, flag, llm, instr) in enumerate(P07_SUBMISSIONS, start=1):
        sid = f"{n:05d}"
        subs.append(Submission(id=sid, student_id=f"s{1000 + n * 7}", submitted_at=start + timedelta(minutes=13 * n),
                               code=code, recorded_correct=flag))
        labels[sid] = {"llm": llm, "instructor": instr}
    (root / "p07" / "submissions.csv").write_bytes(write_submissions_csv(subs))
    (root / "p07" / "labels.json").write_text(json.dumps(labels, indent=2) + "\n")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--root", type=Path, default=ROOT)
    args = parser.parse_args(argv)
    build(args.root)
    for d in sorted(p for p in args.root.iterdir() if p.is_dir()):
        n = len(list((d / "recordings").glob("*.json"))) if (d / "recordings").exists() else 0
        print(f"{d.name}: {n} recording(s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
