$headers

$extra_code

$solution_slot

int main(void)
{
$tests_block
    fflush(stdout);
    return 0;
}
